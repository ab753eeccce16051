#!/usr/bin/env python3
# Copyright 2026 The faasmesh Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Minimal runtime host used by the tests to drive the external-process path.

POST /specialize {"code_path": ..., "entry": ...} loads a Python file once.
POST / calls entry(params) and returns its result; exceptions become 500.
"""

import argparse
import importlib.util
import json
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

_lock = threading.Lock()
_entry = None
_code_path = None


class Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def _reply(self, status, body, content_type="text/plain; charset=utf-8"):
        data = body if isinstance(body, bytes) else body.encode()
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        rid = self.headers.get("X-Faas-Request-Id")
        if rid:
            self.send_header("X-Faas-Request-Id", rid)
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        global _entry, _code_path
        raw = self.rfile.read(int(self.headers.get("Content-Length") or 0))
        if self.path == "/specialize":
            req = json.loads(raw or b"{}")
            with _lock:
                if _code_path is not None:
                    if req["code_path"] == _code_path:
                        return self._reply(200, "specialized")
                    return self._reply(500, "already specialized")
                try:
                    spec = importlib.util.spec_from_file_location("fn", req["code_path"])
                    module = importlib.util.module_from_spec(spec)
                    spec.loader.exec_module(module)
                    _entry = getattr(module, req.get("entry", "main"))
                    _code_path = req["code_path"]
                except Exception as e:  # noqa: BLE001
                    return self._reply(500, f"{type(e).__name__}: {e}")
            return self._reply(200, "specialized")
        if self.path != "/":
            return self._reply(404, "not found")
        if _entry is None:
            return self._reply(500, "not specialized")
        try:
            params = json.loads(raw) if raw else {}
            out = _entry(params)
        except Exception as e:  # noqa: BLE001
            return self._reply(500, f"{type(e).__name__}: {e}")
        if isinstance(out, (dict, list)):
            return self._reply(200, json.dumps(out), "application/json")
        return self._reply(200, str(out))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--port", type=int, default=int(os.environ.get("FAAS_RUNTIME_PORT", "0")))
    args = parser.parse_args()
    ThreadingHTTPServer(("127.0.0.1", args.port), Handler).serve_forever()


if __name__ == "__main__":
    main()
