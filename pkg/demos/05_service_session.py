"""The diagnosis wizard over plain HTTP, start to verdict.

Boots the service on a loopback port, then drives one session with the
bundled heart-disease case: causality, canned datasets, a feature test,
an expert assertion, finalize. Everything the UI would do, in curl-able
form.

Run: python3 demos/05_service_session.py
"""

import json
import socket
import tempfile
import threading
import time
import urllib.parse
import urllib.request

import uvicorn

from shiftscope.service import create_app

TOKEN = "demo-token"

with socket.socket() as s:
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]

app = create_app(data_dir=tempfile.mkdtemp(prefix="shiftscope-demo-"),
                 token=TOKEN)
server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                       log_level="error"))
threading.Thread(target=server.run, daemon=True).start()
while not server.started:
    time.sleep(0.02)
base = f"http://127.0.0.1:{port}"
print(f"service up at {base}")


def call(method, path, body=None, form=None):
    data, ctype = None, None
    if body is not None:
        data, ctype = json.dumps(body).encode(), "application/json"
    elif form is not None:
        data = urllib.parse.urlencode(form).encode()
        ctype = "application/x-www-form-urlencoded"
    req = urllib.request.Request(base + path, data=data, method=method)
    req.add_header("Authorization", f"Bearer {TOKEN}")
    if ctype:
        req.add_header("Content-Type", ctype)
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


boot = json.loads(urllib.request.urlopen(base + "/bootstrap.json").read())
print(f"bootstrap: api at {boot['api_base']}, token required\n")

cases = call("GET", "/api/v1/cases")["cases"]
print("bundled cases:", ", ".join(c["id"] for c in cases))

sid = call("POST", "/api/v1/sessions", body={"case": "heart-disease"})["session_id"]
print(f"session {sid}\n")

out = call("POST", f"/api/v1/sessions/{sid}/answer",
           body={"question": "causality", "value": "XtoY"})
print(f"causality XtoY        -> step {out['step']}")

for role in ("source", "target"):
    out = call("POST", f"/api/v1/sessions/{sid}/datasets",
               form={"role": role, "case": "heart-disease"})
    print(f"dataset {role:<6} (canned) -> step {out['step']}, "
          f"n={out['dataset']['n']}")

out = call("POST", f"/api/v1/sessions/{sid}/tests",
           body={"test": "feature_shift"})
print(f"feature_shift test    -> shifted={out['result']['shifted']}")

call("POST", f"/api/v1/sessions/{sid}/answer", body={"question": "proceed"})
out = call("POST", f"/api/v1/sessions/{sid}/answer",
           body={"question": "concept_stable", "value": "Yes",
                 "justification": "physiology does not depend on the clinic"})
print(f"assertion recorded    -> step {out['step']}")

out = call("POST", f"/api/v1/sessions/{sid}/answer",
           body={"question": "finalize"})
d = out["diagnosis"]
print(f"\ndiagnosis: {d['scenario']['kind']} ({d['scenario']['causality']}),"
      f" confidence {d['confidence']}")
print(f"recommendation: {d['recommendation']['summary']}")

audit = call("GET", f"/api/v1/sessions/{sid}")["audit"]
print(f"\naudit trail ({len(audit)} events):")
for e in audit:
    print(f"  {e['seq']}: {e['event']:<10} {e['step_before']} -> {e['step_after']}")

server.should_exit = True
