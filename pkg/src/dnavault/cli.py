"""dnavault command line.

Exit codes: 0 success, 1 user error, 2 integrity or availability failure.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .cipher import EncryptOptions, decrypt, deserialize, encrypt, serialize
from .errors import DnaVaultError, RegistryError
from .imageio import merge_planes, read_pnm, read_raw, split_planes, write_pnm
from .keystore import KeyRegistry, validate_key
from .multicloud import StoreManifest, load_clouds, retrieve, store_replicated
from .rng import make_rng
from .scramble import PATTERN_COUNT

PLANE_SUFFIXES = (".r", ".g", ".b")


class UsageError(DnaVaultError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_image(args):
    """-> (array, channels). Raw input needs --width/--height."""
    if args.raw:
        if not (args.width and args.height):
            raise UsageError("--raw needs --width and --height")
        return read_raw(args.input, args.width, args.height), 1
    arr, _, _, channels = read_pnm(args.input)
    return arr, channels


def _write_image(path, arr, raw):
    if raw:
        Path(path).write_bytes(np.ascontiguousarray(arr, dtype=np.uint8).tobytes())
    else:
        write_pnm(path, arr)


def _registry(path):
    reg = KeyRegistry(path)
    if not len(reg):
        raise RegistryError(f"no keys registered in {path}")
    return reg


def _pick_key(reg, pixels, rng):
    present = np.unique(np.frombuffer(pixels, dtype=np.uint8))
    usable = [k for k in reg if (reg[k].counts[present] > 0).all()]
    if not usable:
        raise RegistryError("no registered key contains every quadruple of this image")
    return usable[int(rng.integers(0, len(usable)))]


def _opts(args):
    return EncryptOptions(pointer_width=args.pointer_width, corner_embed=not args.no_corner_embed)


def cmd_key(args):
    reg = KeyRegistry(args.keys)
    if args.action == "add":
        if not args.fasta:
            raise UsageError("key add needs a FASTA path")
        key_id = reg.add(args.fasta, args.key_id)
        print(f"added key {key_id}")
    elif args.action == "list":
        for key_id in reg:
            name, digest = reg.entry(key_id)
            print(f"{key_id}\t{name}\t{digest}")
    else:
        ids = [args.key_id] if args.key_id is not None else list(reg)
        for key_id in ids:
            report = validate_key(reg[key_id])
            print(f"key {key_id}: {report.length} bases, {report.summary()}")
    return 0


def cmd_encrypt(args):
    if args.pattern is not None and not 0 <= args.pattern < PATTERN_COUNT:
        raise UsageError(f"--pattern must be 0..{PATTERN_COUNT - 1}")
    reg = _registry(args.keys)
    image, channels = _load_image(args)
    rng = make_rng(args.seed)
    planes = [image] if channels == 1 else split_planes(image)
    outputs = [args.output] if channels == 1 else [args.output + s for s in PLANE_SUFFIXES]
    for plane, out in zip(planes, outputs):
        pixels = plane.tobytes()
        key_id = args.key_id if args.key_id is not None else _pick_key(reg, pixels, rng)
        pattern = args.pattern if args.pattern is not None else int(rng.integers(0, PATTERN_COUNT))
        height, width = plane.shape
        container = encrypt(pixels, width, height, reg[key_id], pattern, rng, _opts(args))
        Path(out).write_bytes(serialize(container))
    return 0


def cmd_decrypt(args):
    reg = KeyRegistry(args.keys)
    src = Path(args.input)
    if not src.exists() and all(Path(args.input + s).exists() for s in PLANE_SUFFIXES):
        planes = [_decrypt_file(args.input + s, reg) for s in PLANE_SUFFIXES]
        _write_image(args.output, merge_planes(planes), args.raw)
    else:
        _write_image(args.output, _decrypt_file(args.input, reg), args.raw)
    return 0


def _decrypt_file(path, reg):
    container = deserialize(Path(path).read_bytes())
    pixels = decrypt(container, reg)
    return np.frombuffer(pixels, dtype=np.uint8).reshape(container.height, container.width)


def cmd_store(args):
    reg = _registry(args.keys)
    image, channels = _load_image(args)
    if channels != 1:
        raise UsageError("store takes grayscale images only")
    clouds = load_clouds(args.clouds)
    height, width = image.shape
    manifest = store_replicated(image.tobytes(), width, height, clouds, reg, make_rng(args.seed),
                                _opts(args), image_name=args.name or Path(args.input).name)
    Path(args.manifest).write_text(manifest.dumps())
    for replica in manifest.replicas:
        print(f"{replica.cloud_id}\t{replica.object_id}")
    for cloud_id in manifest.absent:
        print(f"{cloud_id}\tFAILED", file=sys.stderr)
    return 0


def cmd_fetch(args):
    manifest = StoreManifest.loads(Path(args.manifest).read_text())
    clouds = load_clouds(args.clouds)
    if not clouds:
        raise UsageError(f"{args.clouds}: no clouds configured")
    pixels = retrieve(manifest, clouds, KeyRegistry(args.keys))
    image = np.frombuffer(pixels, dtype=np.uint8).reshape(manifest.height, manifest.width)
    _write_image(args.output, image, args.raw)
    return 0


def cmd_analyze(args):
    if len(args.plain) != len(args.cipher):
        raise UsageError("give one --cipher per --plain")
    reg = KeyRegistry(args.keys) if args.keys else None
    rows = []
    for plain_path, cipher_path in zip(args.plain, args.cipher):
        image, _, _, channels = read_pnm(plain_path)
        if channels != 1:
            raise UsageError(f"{plain_path}: analyze takes grayscale images")
        height, width = image.shape
        pixels = image.tobytes()
        container = deserialize(Path(cipher_path).read_bytes())
        report = None
        if reg is not None:
            pattern, key_id = container.metadata()
            seeds = make_rng(args.seed).integers(0, 2**63 - 1, size=2)
            report = analysis.avalanche(pixels, width, height, 0, reg[key_id], pattern,
                                        int(seeds[0]), int(seeds[1]),
                                        EncryptOptions(pointer_width=container.pointer_width))
        rows.extend(analysis.analyze_pair(Path(plain_path).name, pixels, width, height, container, report))
        if args.hist_dir:
            out = Path(args.hist_dir)
            out.mkdir(parents=True, exist_ok=True)
            stem = Path(plain_path).stem
            write_pnm(out / f"{stem}_plain_hist.pgm", analysis.histogram_image(analysis.histogram(pixels)))
            rendered = analysis.render_cipher_image(container)
            write_pnm(out / f"{stem}_cipher_hist.pgm", analysis.histogram_image(analysis.histogram(rendered)))
    with open(args.output, "w", newline="") as fh:
        analysis.write_csv(rows, fh)
    return 0


def _image_flags(p):
    p.add_argument("--raw", action="store_true", help="raw 8-bit grayscale instead of PGM")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)


def _encrypt_flags(p):
    p.add_argument("--seed", type=int, help="deterministic run (default: OS randomness)")
    p.add_argument("--no-corner-embed", action="store_true")
    p.add_argument("--pointer-width", type=int, default=4, choices=(1, 2, 3, 4))


def build_parser():
    parser = _Parser(prog="dnavault", description="DNA-sequence image encryption with multi-cloud storage")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("key", help="manage the key registry")
    p.add_argument("action", choices=("add", "list", "validate"))
    p.add_argument("fasta", nargs="?")
    p.add_argument("--keys", required=True, help="key registry directory")
    p.add_argument("--key-id", type=int)
    p.set_defaults(func=cmd_key)

    p = sub.add_parser("encrypt", help="encrypt an image into a container")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--key-id", type=int)
    p.add_argument("--pattern", type=int)
    _encrypt_flags(p)
    _image_flags(p)
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt a container")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--raw", action="store_true")
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("store", help="encrypt and replicate to every configured cloud")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--clouds", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--name")
    _encrypt_flags(p)
    _image_flags(p)
    p.set_defaults(func=cmd_store)

    p = sub.add_parser("fetch", help="retrieve an image from its replicas")
    p.add_argument("--manifest", required=True)
    p.add_argument("--clouds", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--raw", action="store_true")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("analyze", help="correlation / histogram / avalanche report")
    p.add_argument("--plain", action="append", required=True)
    p.add_argument("--cipher", action="append", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--keys", help="key registry; enables the avalanche columns")
    p.add_argument("--seed", type=int)
    p.add_argument("--hist-dir", help="write histogram bar charts as PGM here")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DnaVaultError as exc:
        print(f"dnavault: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"dnavault: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
