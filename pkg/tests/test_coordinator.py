import json
import threading
from collections import Counter
from dataclasses import replace

import pytest

from cwskernel.composition import CompositionDef, CompositionStore
from cwskernel.coordinator import Coordinator, ResponseCache
from cwskernel.envelope import DocumentEnvelope, Token, encode_envelope
from cwskernel.errors import (
    Application,
    ContractViolation,
    MissingField,
    NoHealthyReplica,
    StageFailure,
    Transport,
    UnknownComposition,
    UnknownRun,
)
from cwskernel.nlp.resources import StopList
from cwskernel.nlp.services import Resources, build_builtins
from cwskernel.registry import Health, ServiceDescriptor, ServiceRegistry

from .conftest import echo_with


def remote(name, replicas, provides=("x",), requires=("text",), cacheable=False, version="1"):
    return ServiceDescriptor(name, "remote", tuple(replicas), frozenset(requires), frozenset(provides), cacheable, version)


def make(resources=None, retries=2, backoff=0.0, **kw):
    reg = ServiceRegistry()
    comps = CompositionStore(reg)
    handlers = {}
    if resources is not None:
        for name, (desc, handler) in build_builtins(resources).items():
            reg.register_service(desc)
            handlers[name] = handler
    return Coordinator(reg, comps, handlers, retries=retries, backoff=backoff, timeout=2.0, **kw)


@pytest.fixture
def mini():
    res = Resources(stoplists={"en": StopList.of(["the"])}, default_lang="en")
    return make(res)


def strip_times(env):
    return replace(env, provenance=[(p.service, p.version) for p in env.provenance])


def test_clp_mini(mini):
    mini.compositions.define_composition(CompositionDef("clp-mini", ("tokenize", "stopfilter")))
    out, trace = mini.execute("clp-mini", DocumentEnvelope(id="d", text="the cat"))
    assert [t.surface for t in out.tokens] == ["cat"]
    assert [(p.service, p.version) for p in out.provenance] == [("tokenize", "1.0"), ("stopfilter", "1.0")]
    assert trace.outcome == "ok" and [s.service for s in trace.stages] == ["tokenize", "stopfilter"]

    manual = mini.invoke_atomic("stopfilter", mini.invoke_atomic("tokenize", DocumentEnvelope(id="d", text="the cat")))
    assert strip_times(out) == strip_times(manual)


def test_empty_composition_is_identity(mini):
    mini.compositions.define_composition(CompositionDef("id", (), set()))
    env = DocumentEnvelope(id="d", text="x", attrs={"k": 1}).with_provenance("earlier", "1")
    out, trace = mini.execute("id", env)
    assert out == env and trace.stages == [] and trace.outcome == "ok"


def test_missing_initial_field(mini):
    mini.compositions.define_composition(CompositionDef("c", ("tokenize",)))
    with pytest.raises(MissingField):
        mini.execute("c", DocumentEnvelope(id="d"))


def test_unknown_composition(mini):
    with pytest.raises(UnknownComposition):
        mini.execute("nope", DocumentEnvelope(id="d", text="x"))


def test_unreachable_second_stage(mini, dead_url):
    mini.registry.register_service(remote("far", [dead_url, dead_url], provides=("x",), requires=("tokens",)))
    mini.compositions.define_composition(CompositionDef("c", ("tokenize", "far")))
    with pytest.raises(StageFailure) as err:
        mini.execute("c", DocumentEnvelope(id="d", text="a b"))
    failure = err.value
    assert failure.stage == 1 and isinstance(failure.cause, Transport)
    trace = mini.get_run(failure.run_id)
    assert [s.outcome for s in trace.stages] == ["ok", "error"]
    assert trace.outcome == "error" and trace.stages[1].error["code"] == "Transport"


def test_application_error_not_retried(stub_factory):
    stub, url = stub_factory(lambda body: (500, json.dumps({"code": "Boom", "message": "bad"}).encode()))
    co = make(retries=2)
    co.registry.register_service(remote("svc", [url]))
    with pytest.raises(Application) as err:
        co.invoke_atomic("svc", DocumentEnvelope(id="d", text="t"))
    assert err.value.app_code == "Boom" and stub.calls == 1


def test_bare_5xx_is_transport_and_retried(stub_factory):
    stub, url = stub_factory(lambda body: (502, b"gateway"))
    co = make(retries=2)
    co.registry.register_service(remote("svc", [url]))
    with pytest.raises(Transport):
        co.invoke_atomic("svc", DocumentEnvelope(id="d", text="t"))
    assert stub.calls == 3


def test_retry_moves_to_next_replica(stub_factory, dead_url):
    stub, url = stub_factory(echo_with(x=1))
    co = make()
    co.registry.register_service(remote("svc", [dead_url, url]))
    out = co.invoke_atomic("svc", DocumentEnvelope(id="d", text="t"))
    assert out.attrs["x"] == 1 and stub.calls == 1


def test_missing_provides_is_contract_violation(stub_factory):
    _, url = stub_factory(echo_with())
    co = make()
    co.registry.register_service(remote("svc", [url], provides=("summary",)))
    with pytest.raises(ContractViolation):
        co.invoke_atomic("svc", DocumentEnvelope(id="d", text="t"))


def test_malformed_response_is_contract_violation(stub_factory):
    _, url = stub_factory(lambda body: (200, b"{not json"))
    co = make()
    co.registry.register_service(remote("svc", [url]))
    with pytest.raises(ContractViolation):
        co.invoke_atomic("svc", DocumentEnvelope(id="d", text="t"))


def test_service_provenance_is_discarded(stub_factory):
    def forge(body):
        env = DocumentEnvelope(id="d", text="t", attrs={"x": 1}).with_provenance("forged", "9")
        return 200, encode_envelope(env)

    _, url = stub_factory(forge)
    co = make()
    co.registry.register_service(remote("svc", [url]))
    out = co.invoke_atomic("svc", DocumentEnvelope(id="d", text="t"))
    assert [p.service for p in out.provenance] == ["svc"]


def test_params_travel_in_header(stub_factory):
    stub, url = stub_factory(echo_with(x=1))
    co = make()
    co.registry.register_service(remote("svc", [url]))
    co.compositions.define_composition(CompositionDef.from_dict({"name": "c", "stages": [{"service": "svc", "params": {"k": 2}}]}))
    co.execute("c", DocumentEnvelope(id="d", text="t"))
    assert json.loads(stub.params[0]) == {"k": 2}


def test_round_robin_two_healthy():
    co = make()
    co.registry.register_service(remote("svc", ["http://a", "http://b"]))
    counts = Counter(co.select_replica("svc") for _ in range(4))
    assert sorted(counts.values()) == [2, 2]


def test_unhealthy_replica_skipped():
    co = make()
    co.registry.register_service(remote("svc", ["http://a", "http://b"]))
    co.registry.mark("svc", 0, Health.UNHEALTHY)
    assert {co.select_replica("svc") for _ in range(7)} == {"http://b"}


def test_all_unhealthy():
    co = make()
    co.registry.register_service(remote("svc", ["http://a", "http://b"]))
    co.registry.mark("svc", 0, Health.UNHEALTHY)
    co.registry.mark("svc", 1, Health.UNHEALTHY)
    with pytest.raises(NoHealthyReplica):
        co.select_replica("svc")


def test_cache_hit_is_byte_identical(stub_factory):
    stub, url = stub_factory(echo_with(x=1))
    co = make()
    co.registry.register_service(remote("svc", [url], cacheable=True))
    env = DocumentEnvelope(id="d", text="t")
    first, hit1 = co.cached_invoke("svc", env)
    second, hit2 = co.cached_invoke("svc", env)
    assert (hit1, hit2) == (False, True) and stub.calls == 1
    assert encode_envelope(replace(first, provenance=[])) == encode_envelope(replace(second, provenance=[]))


def test_non_cacheable_never_hits(stub_factory):
    stub, url = stub_factory(echo_with(x=1))
    co = make()
    co.registry.register_service(remote("svc", [url], cacheable=False))
    env = DocumentEnvelope(id="d", text="t")
    assert [co.cached_invoke("svc", env)[1] for _ in range(3)] == [False] * 3
    assert stub.calls == 3


def test_expired_entry_is_a_miss(stub_factory):
    now = [0.0]
    stub, url = stub_factory(echo_with(x=1))
    co = make()
    co.cache = ResponseCache(ttl=10, clock=lambda: now[0])
    co.registry.register_service(remote("svc", [url], cacheable=True))
    env = DocumentEnvelope(id="d", text="t")
    co.cached_invoke("svc", env)
    now[0] = 9.9
    assert co.cached_invoke("svc", env)[1]
    now[0] = 10.0
    assert not co.cached_invoke("svc", env)[1]
    assert stub.calls == 2


def test_version_change_invalidates(stub_factory):
    stub, url = stub_factory(echo_with(x=1))
    co = make()
    co.registry.register_service(remote("svc", [url], cacheable=True, version="1"))
    env = DocumentEnvelope(id="d", text="t")
    co.cached_invoke("svc", env)
    co.registry.deregister("svc")
    co.registry.register_service(remote("svc", [url], cacheable=True, version="2"))
    assert not co.cached_invoke("svc", env)[1]
    assert stub.calls == 2


def test_cache_key_ignores_provenance_but_not_params(stub_factory):
    stub, url = stub_factory(echo_with(x=1))
    co = make()
    co.registry.register_service(remote("svc", [url], cacheable=True))
    env = DocumentEnvelope(id="d", text="t")
    co.cached_invoke("svc", env)
    assert co.cached_invoke("svc", env.with_provenance("p", "1"))[1]
    assert not co.call("svc", env, {"k": 1})[1]


def test_cache_transparency(mini):
    mini.compositions.define_composition(CompositionDef("c", ("tokenize", "stopfilter")))
    env = DocumentEnvelope(id="d", text="the cat and the dog")
    cold, _ = mini.execute("c", env, use_cache=False)
    warm1, _ = mini.execute("c", env)
    warm2, trace = mini.execute("c", env)
    assert all(s.cache_hit for s in trace.stages)
    assert cold.payload() == warm1.payload() == warm2.payload()


def test_builtins_served_remotely(live_server, resources):
    _, url = live_server
    co = make()
    co.registry.register_service(remote("tok", [f"{url}/svc/tokenize"], provides=("tokens",)))
    out = co.invoke_atomic("tok", DocumentEnvelope(id="d", text="a b"))
    assert out.tokens == [Token("a"), Token("b")]
    local = make(resources).invoke_atomic("tokenize", DocumentEnvelope(id="d", text="a b"))
    assert out.tokens == local.tokens


def test_interleaved_runs_do_not_share_fields(mini):
    mini.compositions.define_composition(CompositionDef("c", ("tokenize", "stopfilter")))
    results = {}

    def run(i):
        out, _ = mini.execute("c", DocumentEnvelope(id=f"d{i}", text=f"word{i} the other{i}"), use_cache=False)
        results[i] = [t.surface for t in out.tokens]

    threads = [threading.Thread(target=run, args=(i,)) for i in range(20)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results == {i: [f"word{i}", f"other{i}"] for i in range(20)}


def test_trace_lookup(mini):
    mini.compositions.define_composition(CompositionDef("c", ("tokenize",)))
    _, trace = mini.execute("c", DocumentEnvelope(id="d", text="x"))
    assert mini.get_run(trace.run_id) is trace
    with pytest.raises(UnknownRun):
        mini.get_run("nope")


def test_run_retention_is_bounded(mini):
    mini.max_runs = 3
    mini.compositions.define_composition(CompositionDef("c", ("tokenize",)))
    ids = [mini.execute("c", DocumentEnvelope(id="d", text="x"))[1].run_id for _ in range(5)]
    with pytest.raises(UnknownRun):
        mini.get_run(ids[0])
    assert mini.get_run(ids[-1]).run_id == ids[-1]


def test_builtin_error_becomes_application(mini):
    with pytest.raises(Application) as err:
        mini.call("to_win1251", DocumentEnvelope(id="d", text="日本"))
    assert err.value.app_code == "Unmappable"
