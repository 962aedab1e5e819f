"""Client side of the denoiser/regularizer bridge wire protocol.

Frames are: a 4-byte little-endian length of the JSON header, the UTF-8
header itself, then a raw payload whose byte count the header declares in
``payload_bytes`` (height*width*4 for plane frames: row-major 32-bit
little-endian floats).  One request is in flight per connection.

Endpoints:

* ``cmd:<shell command>`` -- spawn the command and talk over its stdio.
* ``socket:PORT`` or ``socket:HOST:PORT`` -- connect to a TCP server.
"""

from __future__ import annotations

import json
import shlex
import socket
import struct
import subprocess

import numpy as np

from .errors import BridgeError, ParameterError

__all__ = [
    "encode_frame",
    "decode_frame",
    "read_frame",
    "plane_to_payload",
    "payload_to_plane",
    "BridgeClient",
    "BridgeDenoiser",
    "bridge_regularizer",
]

_LEN = struct.Struct("<I")


def plane_to_payload(plane: np.ndarray) -> bytes:
    return np.ascontiguousarray(plane, dtype="<f4").tobytes()


def payload_to_plane(payload: bytes, height: int, width: int) -> np.ndarray:
    expected = height * width * 4
    if len(payload) != expected:
        raise BridgeError(
            f"payload holds {len(payload)} bytes, expected {expected} "
            f"for a {height}x{width} plane"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(height, width).astype(np.float64)


def encode_frame(header: dict, payload: bytes = b"") -> bytes:
    header = dict(header)
    header["payload_bytes"] = len(payload)
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    return _LEN.pack(len(raw)) + raw + payload


def decode_frame(blob: bytes) -> tuple[dict, bytes]:
    """Inverse of :func:`encode_frame` for a complete in-memory frame."""
    if len(blob) < _LEN.size:
        raise BridgeError("frame shorter than its length prefix")
    (hlen,) = _LEN.unpack(blob[: _LEN.size])
    if len(blob) < _LEN.size + hlen:
        raise BridgeError("frame truncated inside the header")
    header = json.loads(blob[_LEN.size : _LEN.size + hlen].decode("utf-8"))
    payload = blob[_LEN.size + hlen :]
    if len(payload) != int(header.get("payload_bytes", 0)):
        raise BridgeError("payload length does not match header declaration")
    return header, payload


def _read_exact(stream, count: int) -> bytes:
    chunks = []
    got = 0
    while got < count:
        chunk = stream.read(count - got)
        if not chunk:
            raise BridgeError("bridge connection closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def read_frame(stream) -> tuple[dict, bytes]:
    """Read one frame from a binary stream (blocking)."""
    (hlen,) = _LEN.unpack(_read_exact(stream, _LEN.size))
    header = json.loads(_read_exact(stream, hlen).decode("utf-8"))
    payload = _read_exact(stream, int(header.get("payload_bytes", 0)))
    return header, payload


class _SocketStream:
    """File-like read/write wrapper over a TCP socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock

    def read(self, count: int) -> bytes:
        return self._sock.recv(count)

    def write(self, data: bytes) -> None:
        self._sock.sendall(data)

    def flush(self) -> None:
        pass

    def close(self) -> None:
        self._sock.close()


class BridgeClient:
    """Single-connection client for a bridge server."""

    def __init__(self, endpoint: str):
        self.endpoint = endpoint
        self._proc = None
        if endpoint.startswith("cmd:"):
            cmd = shlex.split(endpoint[len("cmd:"):])
            self._proc = subprocess.Popen(
                cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
            self._in = self._proc.stdout
            self._out = self._proc.stdin
        elif endpoint.startswith("socket:"):
            spec = endpoint[len("socket:"):]
            host, _, port = spec.rpartition(":")
            host = host or "127.0.0.1"
            sock = socket.create_connection((host, int(port)))
            stream = _SocketStream(sock)
            self._in = stream
            self._out = stream
        else:
            raise ParameterError(
                f"unsupported bridge endpoint {endpoint!r}; "
                "use 'cmd:<command>' or 'socket:[host:]port'"
            )

    def close(self) -> None:
        try:
            self._out.close()
        except Exception:
            pass
        if self._proc is not None:
            self._proc.wait(timeout=10)

    def __enter__(self) -> "BridgeClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _roundtrip(self, header: dict, payload: bytes = b"") -> tuple[dict, bytes]:
        self._out.write(encode_frame(header, payload))
        self._out.flush()
        resp, resp_payload = read_frame(self._in)
        if resp.get("status") != "ok":
            raise BridgeError(f"bridge error: {resp.get('message', 'unknown')}")
        return resp, resp_payload

    def capabilities(self) -> dict:
        resp, _ = self._roundtrip({"kind": "capabilities"})
        return {"kinds": resp.get("kinds", []), "sigma_range": resp.get("sigma_range")}

    def denoise(self, plane: np.ndarray, sigma: float) -> np.ndarray:
        plane = np.asarray(plane, dtype=np.float64)
        h, w = plane.shape
        resp, payload = self._roundtrip(
            {"kind": "denoise", "sigma": float(sigma), "height": h, "width": w},
            plane_to_payload(plane),
        )
        return payload_to_plane(payload, h, w)

    def regularizer_grad(self, plane: np.ndarray, sigma: float) -> tuple[float, np.ndarray]:
        """Evaluate an external regularizer: returns (value, gradient)."""
        plane = np.asarray(plane, dtype=np.float64)
        h, w = plane.shape
        resp, payload = self._roundtrip(
            {"kind": "regularizer-grad", "sigma": float(sigma), "height": h, "width": w},
            plane_to_payload(plane),
        )
        return float(resp["value"]), payload_to_plane(payload, h, w)

    def declared_lipschitz(self) -> float | None:
        resp, _ = self._roundtrip({"kind": "capabilities"})
        return resp.get("lipschitz")


class BridgeDenoiser:
    """DenoiserHandle backend that forwards planes to a bridge server."""

    backend = "bridge"

    def __init__(self, client: BridgeClient):
        self.client = client

    def denoise(self, plane: np.ndarray, sigma: float) -> np.ndarray:
        return self.client.denoise(plane, sigma)


def bridge_regularizer(client: BridgeClient, sigma: float, lipschitz_const=None, name="bridge"):
    """Real-plane plugin regularizer evaluated over the bridge.

    Wraps "regularizer-grad" messages behind the plugin interface; the
    Lipschitz bound comes from the server's capabilities unless passed
    explicitly.  Run the conformance suite before handing it to a solver.
    """
    from .regularizers import PluginRegularizer

    if lipschitz_const is None:
        lipschitz_const = client.declared_lipschitz()
    return PluginRegularizer(
        value_fn=lambda p: client.regularizer_grad(p, sigma)[0],
        grad_fn=lambda p: client.regularizer_grad(p, sigma)[1],
        lipschitz_const=lipschitz_const,
        sigma=sigma,
        name=name,
    )
