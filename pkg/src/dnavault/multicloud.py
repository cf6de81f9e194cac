"""Replicated storage of independently encrypted containers.

Each cloud gets its own randomly drawn (key_id, pattern, seed), so the
replicas of one image are different ciphertexts that decrypt to the same
pixels.  Objects are content addressed: object_id is the hex SHA-256 of
the serialized container.

Cloud config, one backend per line (``#`` comments allowed)::

    cloud_id  local-directory   /path/to/dir
    cloud_id  http-object-store https://host:port  bucket  [TOKEN_ENV_VAR]

Manifest, tab separated.  Header line, then one line per cloud::

    DVLT-MANIFEST  1  image_name  width  height  plaintext_sha256
    replica  cloud_id  object_id  key_id  pattern  container_sha256
    absent   cloud_id  -          -       -        -
"""

import hashlib
import logging
import os
import tempfile
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cipher import EncryptOptions, decrypt, deserialize, encrypt, serialize
from .errors import (
    AllBackendsFailed,
    AllReplicasUnavailable,
    ConfigError,
    DnaVaultError,
    IntegrityFailure,
    NotFound,
    Unavailable,
)
from .scramble import PATTERN_COUNT

log = logging.getLogger(__name__)

LOCAL = "local-directory"
HTTP = "http-object-store"
MANIFEST_MAGIC = "DVLT-MANIFEST"
MANIFEST_VERSION = "1"


@dataclass(frozen=True)
class BackendDescriptor:
    cloud_id: str
    kind: str
    location: str
    bucket: str = ""
    auth_env: str = ""


class LocalDirBackend:
    """A directory standing in for one provider. A missing directory is an outage."""

    def __init__(self, desc):
        self.desc = desc
        self.root = Path(desc.location)

    def _path(self, object_id):
        if not object_id or "/" in object_id or object_id.startswith("."):
            raise ValueError(f"bad object id {object_id!r}")
        return self.root / object_id

    def _check_up(self):
        if not self.root.is_dir():
            raise Unavailable(f"{self.desc.cloud_id}: {self.root} is not reachable")

    def put(self, object_id, data):
        self._check_up()
        path = self._path(object_id)
        try:
            fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".put-")
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except OSError as exc:
            raise Unavailable(f"{self.desc.cloud_id}: {exc}") from exc

    def get(self, object_id):
        self._check_up()
        try:
            return self._path(object_id).read_bytes()
        except FileNotFoundError as exc:
            raise NotFound(f"{self.desc.cloud_id}: no object {object_id}") from exc
        except OSError as exc:
            raise Unavailable(f"{self.desc.cloud_id}: {exc}") from exc

    def exists(self, object_id):
        self._check_up()
        return self._path(object_id).is_file()


class HttpBackend:
    """PUT/GET/HEAD on {base}/{bucket}/{object_id} with optional bearer token."""

    def __init__(self, desc, timeout=10.0):
        self.desc = desc
        self.timeout = timeout

    def _request(self, method, object_id, data=None):
        url = f"{self.desc.location.rstrip('/')}/{self.desc.bucket}/{object_id}"
        req = urllib.request.Request(url, data=data, method=method)
        if data is not None:
            req.add_header("Content-Type", "application/octet-stream")
        if self.desc.auth_env:
            token = os.environ.get(self.desc.auth_env)
            if token:
                req.add_header("Authorization", f"Bearer {token}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read()
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                raise NotFound(f"{self.desc.cloud_id}: no object {object_id}") from exc
            raise Unavailable(f"{self.desc.cloud_id}: HTTP {exc.code}") from exc
        except (urllib.error.URLError, OSError) as exc:
            raise Unavailable(f"{self.desc.cloud_id}: {exc}") from exc

    def put(self, object_id, data):
        self._request("PUT", object_id, bytes(data))

    def get(self, object_id):
        return self._request("GET", object_id)

    def exists(self, object_id):
        try:
            self._request("HEAD", object_id)
        except NotFound:
            return False
        return True


def open_backend(desc):
    if desc.kind == LOCAL:
        return LocalDirBackend(desc)
    if desc.kind == HTTP:
        return HttpBackend(desc)
    raise ConfigError(f"unknown backend kind {desc.kind!r}")


def parse_clouds(text):
    """Cloud config text -> list of BackendDescriptor."""
    descs, seen = [], set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise ConfigError(f"line {lineno}: expected 'cloud_id kind location [bucket] [auth_env]'")
        cloud_id, kind, location = parts[:3]
        if kind == LOCAL and len(parts) != 3:
            raise ConfigError(f"line {lineno}: {LOCAL} takes no bucket or auth_env")
        if kind == HTTP and len(parts) not in (4, 5):
            raise ConfigError(f"line {lineno}: {HTTP} needs a bucket")
        if kind not in (LOCAL, HTTP):
            raise ConfigError(f"line {lineno}: unknown backend kind {kind!r}")
        if cloud_id in seen:
            raise ConfigError(f"line {lineno}: duplicate cloud_id {cloud_id!r}")
        seen.add(cloud_id)
        descs.append(BackendDescriptor(cloud_id, kind, location, *parts[3:]))
    return descs


def load_clouds(path):
    return [open_backend(d) for d in parse_clouds(Path(path).read_text())]


@dataclass(frozen=True)
class Replica:
    cloud_id: str
    object_id: str
    key_id: int
    pattern: int
    container_sha256: str


@dataclass
class StoreManifest:
    image_name: str
    width: int
    height: int
    plaintext_sha256: str
    replicas: list = field(default_factory=list)
    absent: list = field(default_factory=list)  # cloud_ids whose upload failed

    def dumps(self):
        lines = ["\t".join([MANIFEST_MAGIC, MANIFEST_VERSION, _clean(self.image_name),
                            str(self.width), str(self.height), self.plaintext_sha256])]
        for r in self.replicas:
            lines.append("\t".join(["replica", r.cloud_id, r.object_id, str(r.key_id),
                                    str(r.pattern), r.container_sha256]))
        for cloud_id in self.absent:
            lines.append("\t".join(["absent", cloud_id, "-", "-", "-", "-"]))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        rows = [line.split("\t") for line in text.splitlines() if line.strip()]
        if not rows or len(rows[0]) != 6 or rows[0][0] != MANIFEST_MAGIC:
            raise ConfigError("not a DVLT manifest")
        if rows[0][1] != MANIFEST_VERSION:
            raise ConfigError(f"unsupported manifest version {rows[0][1]}")
        _, _, name, width, height, digest = rows[0]
        manifest = cls(name, int(width), int(height), digest)
        for row in rows[1:]:
            if len(row) != 6:
                raise ConfigError(f"bad manifest line: {row!r}")
            if row[0] == "replica":
                manifest.replicas.append(Replica(row[1], row[2], int(row[3]), int(row[4]), row[5]))
            elif row[0] == "absent":
                manifest.absent.append(row[1])
            else:
                raise ConfigError(f"unknown manifest record {row[0]!r}")
        return manifest


def _clean(text):
    return " ".join(str(text).split()) or "-"


def store_replicated(pixels, width, height, clouds, registry, rng, opts=None, image_name="image",
                     max_workers=4):
    """Encrypt one replica per cloud and upload them.

    ``registry`` maps key_id -> KeyIndex; only keys containing every
    quadruple of the image are eligible.  Per-cloud draws happen in cloud
    order so a seeded ``rng`` gives reproducible manifests.
    """
    if not clouds:
        raise ConfigError("no clouds configured")
    pixels = bytes(pixels)
    present = np.unique(np.frombuffer(pixels, dtype=np.uint8))
    usable = [k for k in sorted(registry) if (registry[k].counts[present] > 0).all()]
    if not usable:
        raise ConfigError("no key in the registry covers every pixel value of this image")
    opts = opts or EncryptOptions()

    jobs = []
    for backend in clouds:
        key_id = usable[int(rng.integers(0, len(usable)))]
        pattern = int(rng.integers(0, PATTERN_COUNT))
        seed = int(rng.integers(0, 2**63 - 1))
        container = encrypt(pixels, width, height, registry[key_id], pattern,
                            np.random.default_rng(seed), opts)
        blob = serialize(container)
        digest = hashlib.sha256(blob).hexdigest()
        jobs.append((backend, Replica(backend.desc.cloud_id, digest, key_id, pattern, digest), blob))

    def upload(job):
        backend, replica, blob = job
        try:
            backend.put(replica.object_id, blob)
            return replica, None
        except DnaVaultError as exc:
            log.warning("upload to %s failed: %s", replica.cloud_id, exc)
            return replica, exc

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(upload, jobs))

    manifest = StoreManifest(image_name, width, height, hashlib.sha256(pixels).hexdigest())
    for replica, exc in results:
        if exc is None:
            manifest.replicas.append(replica)
        else:
            manifest.absent.append(replica.cloud_id)
    if not manifest.replicas:
        raise AllBackendsFailed(f"no replica stored ({len(clouds)} cloud(s) tried)")
    return manifest


def retrieve(manifest, clouds, registry):
    """First replica that downloads, decrypts and hash-matches wins."""
    by_id = {b.desc.cloud_id: b for b in clouds}
    reached = 0
    problems = []
    for replica in manifest.replicas:
        backend = by_id.get(replica.cloud_id)
        if backend is None:
            problems.append(f"{replica.cloud_id}: not configured")
            continue
        try:
            blob = backend.get(replica.object_id)
        except (NotFound, Unavailable) as exc:
            problems.append(str(exc))
            continue
        reached += 1
        try:
            if hashlib.sha256(blob).hexdigest() != replica.container_sha256:
                raise IntegrityFailure(f"{replica.cloud_id}: container hash mismatch")
            container = deserialize(blob)
            if (container.width, container.height) != (manifest.width, manifest.height):
                raise IntegrityFailure(f"{replica.cloud_id}: dimensions differ from manifest")
            pixels = decrypt(container, registry)
            if hashlib.sha256(pixels).hexdigest() != manifest.plaintext_sha256:
                raise IntegrityFailure(f"{replica.cloud_id}: plaintext hash mismatch")
        except DnaVaultError as exc:
            problems.append(f"{type(exc).__name__}: {exc}")
            continue
        return pixels
    detail = "; ".join(problems)
    if reached:
        raise IntegrityFailure(f"every reachable replica failed verification ({detail})")
    raise AllReplicasUnavailable(f"no replica could be downloaded ({detail})")
