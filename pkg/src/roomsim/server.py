"""Realtime coordination server.

One engine thread steps the simulation at a wall-clock pace; websocket clients
get full state snapshots after every control tick. Outbound traffic is
coalesced per client with a depth-one latest-wins slot: a slow consumer only
ever lags to the newest snapshot and can never stall the engine or other
clients. Inbound commands are validated on the connection thread, acknowledged
by sequence number, and applied at the next control tick boundary in arrival
order.
"""
from __future__ import annotations

import json
import queue
import threading
import time

from websockets.sync.server import serve

from .engine import Engine, EventError, validate_event
from .trace import canonical_dumps

PROTOCOL_VERSION = 1


class _ClientSlot:
    def __init__(self, conn, client_id: int):
        self.conn = conn
        self.id = client_id
        self.cond = threading.Condition()
        self.latest: dict | None = None
        self.closed = False
        self.ack = 0          # last accepted inbound command seq
        self.out_seq = 0

    def offer(self, snapshot: dict) -> None:
        with self.cond:
            self.latest = snapshot  # depth-1: unsent older state is overwritten
            self.cond.notify()

    def close(self) -> None:
        with self.cond:
            self.closed = True
            self.cond.notify()


class SyncServer:
    """Serves one engine to any number of viewers/controllers."""

    def __init__(self, engine: Engine, host: str = "127.0.0.1", port: int = 8765,
                 realtime_factor: float = 1.0):
        self.engine = engine
        self.host = host
        self.port = port
        self.realtime_factor = realtime_factor
        self.commands: queue.Queue[dict] = queue.Queue()
        self.clients: dict[int, _ClientSlot] = {}
        self._clients_lock = threading.Lock()
        self._next_client = 1
        self._stop = threading.Event()
        self._ws_server = None
        engine.on_control_tick = self._broadcast

    # engine side ------------------------------------------------------------

    def _broadcast(self, snapshot: dict) -> None:
        with self._clients_lock:
            slots = list(self.clients.values())
        for slot in slots:
            slot.offer(snapshot)

    def _drain_commands(self) -> None:
        while True:
            try:
                ev = self.commands.get_nowait()
            except queue.Empty:
                return
            try:
                self.engine.inject_event(ev)
            except EventError:
                pass  # already rejected at the connection; defensive double-check

    def run_sim(self, duration: float | None = None) -> None:
        """Step the engine at the configured pace until stopped."""
        w = self.engine.world
        dt = w.clock.physics_dt
        end = None if duration is None else w.now + duration
        target = time.monotonic()
        while not self._stop.is_set():
            if end is not None and w.now >= end - 1e-12:
                break
            if w.tick % w.clock.control_divisor == 0:
                self._drain_commands()
            self.engine.step()
            if self.realtime_factor > 0:
                target += dt / self.realtime_factor
                lag = target - time.monotonic()
                if lag > 0:
                    time.sleep(lag)
                elif lag < -1.0:
                    target = time.monotonic()  # fell far behind: resync, don't spiral

    # websocket side -----------------------------------------------------------

    def _hello(self) -> dict:
        w = self.engine.world
        return {
            "v": PROTOCOL_VERSION,
            "type": "hello",
            "payload": {
                "clock": {"physics_dt": w.clock.physics_dt, "control_divisor": w.clock.control_divisor},
                "play_area": {
                    "width": w.play_area.width,
                    "depth": w.play_area.depth,
                    "margin": w.play_area.margin,
                },
                "robot": {
                    "body_radius": next(iter(w.robots.values())).spec.body_radius if w.robots else 0.175,
                },
                "furniture_specs": {
                    sid: {
                        "kind": s.kind,
                        "footprint": [list(v) for v in s.footprint],
                        "underside_height": s.underside_height,
                    }
                    for sid, s in sorted(w.furniture_specs.items())
                },
                "virtual_objects": {
                    vid: {
                        "kind": o.kind,
                        "size": list(o.size),
                        "touchable": o.touchable,
                    }
                    for vid, o in sorted(w.scene.objects.items())
                },
                "user": {
                    "safety_radius": w.user.safety_radius,
                    "reach_radius": w.user.reach_radius,
                },
            },
        }

    def _sender(self, slot: _ClientSlot) -> None:
        while True:
            with slot.cond:
                while slot.latest is None and not slot.closed:
                    slot.cond.wait()
                if slot.closed:
                    return
                snap = slot.latest
                slot.latest = None
                ack = slot.ack
            slot.out_seq += 1
            msg = {"v": PROTOCOL_VERSION, "type": "state", "seq": slot.out_seq, "ack": ack, "payload": snap}
            try:
                slot.conn.send(canonical_dumps(msg))
            except Exception:
                slot.close()
                return

    def _handler(self, conn) -> None:
        with self._clients_lock:
            cid = self._next_client
            self._next_client += 1
            slot = _ClientSlot(conn, cid)
            self.clients[cid] = slot
        sender = threading.Thread(target=self._sender, args=(slot,), daemon=True)
        sender.start()
        try:
            conn.send(canonical_dumps(self._hello()))
            for raw in conn:
                try:
                    msg = json.loads(raw)
                except (TypeError, json.JSONDecodeError):
                    conn.send(canonical_dumps(self._error(0, "not valid JSON")))
                    continue
                mtype = msg.get("type")
                seq = msg.get("seq", 0)
                if mtype == "ping":
                    conn.send(canonical_dumps({"v": PROTOCOL_VERSION, "type": "pong", "seq": seq}))
                    continue
                if mtype != "command":
                    conn.send(canonical_dumps(self._error(seq, f"unknown message type {mtype!r}")))
                    continue
                event = msg.get("payload")
                try:
                    validate_event(event)
                except EventError as e:
                    conn.send(canonical_dumps(self._error(seq, str(e))))
                    continue
                if isinstance(seq, int):
                    slot.ack = max(slot.ack, seq)
                self.commands.put(event)
        except Exception:
            pass
        finally:
            slot.close()
            with self._clients_lock:
                self.clients.pop(cid, None)

    @staticmethod
    def _error(seq, message: str) -> dict:
        return {"v": PROTOCOL_VERSION, "type": "error", "seq": seq, "payload": {"message": message}}

    # lifecycle ------------------------------------------------------------------

    def start(self) -> None:
        """Bind the websocket listener and run it on a daemon thread."""
        self._ws_server = serve(self._handler, self.host, self.port)
        threading.Thread(target=self._ws_server.serve_forever, daemon=True).start()

    def stop(self) -> None:
        self._stop.set()
        if self._ws_server is not None:
            self._ws_server.shutdown()
        with self._clients_lock:
            slots = list(self.clients.values())
        for slot in slots:
            slot.close()

    @property
    def bound_port(self) -> int:
        """Actual listening port (useful when constructed with port 0)."""
        sock = self._ws_server.socket
        return sock.getsockname()[1]
