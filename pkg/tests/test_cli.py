import io
import json
import subprocess
import sys

import pytest
from fastapi.testclient import TestClient

from cwskernel import Kernel, KernelConfig
from cwskernel.api.app import create_app
from cwskernel.cli import main
from cwskernel.envelope import DocumentEnvelope, encode_envelope

TEXT = (
    "Libraries keep books and journals. A library catalogue lists every book. "
    "Readers search the catalogue before they visit. Journals arrive every month."
)


def cli(client, *argv, peer=None):
    out = io.StringIO()
    code = main(list(argv), client=client, peer_factory=lambda url: peer, out=out)
    return code, out.getvalue()


@pytest.fixture
def doc(tmp_path):
    path = tmp_path / "doc.txt"
    path.write_text(TEXT, encoding="utf-8")
    return path


def test_no_arguments_is_usage_error(capsys):
    assert main([]) == 2
    assert "usage:" in capsys.readouterr().err


def test_console_script_usage_error():
    proc = subprocess.run([sys.executable, "-m", "cwskernel.cli"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage:" in proc.stderr


def test_run_unknown_composition(client, doc, capsys):
    code, _ = cli(client, "run", "missing", "--in", str(doc))
    assert code == 1 and "UnknownComposition" in capsys.readouterr().err


def test_run_summ_matches_http(client, doc):
    code, out = cli(client, "run", "summ", "--in", str(doc))
    assert code == 0
    http = client.post("/compositions/summ/execute", content=encode_envelope(DocumentEnvelope(id="x", text=TEXT)))
    assert out.splitlines() == json.loads(http.content)["envelope"]["summary"]


def test_run_writes_envelope(client, doc, tmp_path):
    target = tmp_path / "out.json"
    code, out = cli(client, "run", "keywords", "--in", str(doc), "--out", str(target))
    assert code == 0
    env = json.loads(target.read_bytes())
    assert [line.split("\t")[0] for line in out.splitlines()] == [k[0] for k in env["keywords"]]


def test_register_and_compose(client, tmp_path):
    comp = tmp_path / "comp.json"
    comp.write_text(json.dumps({"name": "tok", "stages": ["tokenize"]}))
    assert cli(client, "compose", "-f", str(comp)) == (0, "tok\n")
    desc = tmp_path / "desc.json"
    desc.write_text(json.dumps({"name": "r", "kind": "remote", "replicas": ["http://127.0.0.1:9"], "provides": ["x"]}))
    assert cli(client, "register", "-f", str(desc)) == (0, "r\n")
    assert cli(client, "register", "-f", str(desc))[0] == 1
    assert cli(client, "register", "-f", str(tmp_path / "absent.json"))[0] == 1


def test_search(client, doc):
    cli(client, "run", "ontoprep", "--in", str(doc))
    code, out = cli(client, "search", "library catalogue")
    assert code == 0 and len(out.splitlines()) == 1
    http = client.get("/search", params={"q": "library catalogue"}).json()["hits"]
    assert out.split("\t")[0] == http[0]["doc_id"]


def test_sim_and_near(client):
    code, out = cli(client, "sim", "cat", "cat")
    assert code == 0 and float(out) == pytest.approx(1.0)
    code, out = cli(client, "near", "cat", "-k", "2")
    http = client.get("/vectors/nearest", params={"t": "cat", "k": 2}).json()["neighbours"]
    assert [line.split("\t")[0] for line in out.splitlines()] == [n["term"] for n in http]
    assert cli(client, "sim", "cat", "nope")[0] == 1


def test_sync_both_ways(client, resources):
    client.put("/docs/mine", content=b'{"a": 1}')
    peer_kernel = Kernel(KernelConfig(node_id="node-2"), resources=resources)
    with TestClient(create_app(peer_kernel)) as peer:
        peer.put("/docs/theirs", content=b'{"b": 2}')
        code, out = cli(client, "sync", "--peer", "http://peer", peer=peer)
        assert code == 0
        assert "pulled applied=1" in out and "pushed applied=1" in out
        assert client.get("/sync/export").json()["entries"][1]["id"] == "theirs"
        assert peer_kernel.store.ids() == ["mine", "theirs"]


def test_unreachable_server(dead_url, capsys):
    assert main(["--url", dead_url, "search", "x"]) == 1
    assert "cannot reach" in capsys.readouterr().err
