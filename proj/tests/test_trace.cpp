#include <doctest.h>

#include "transedge/simulation.hpp"

using namespace transedge;
using namespace transedge::trace;

namespace {

trace_log small_run(std::uint64_t seed)
{
    sim_config c;
    c.seed = seed;
    c.workload.n_txns = 120;
    c.workload.n_keys = 500;
    c.n_clients = 6;
    return simulate(c).trace;
}

} // namespace

TEST_CASE("JSONL round trip is lossless")
{
    auto log = small_run(5);
    auto text = log.to_jsonl();
    auto back = trace_log::from_jsonl(text);
    CHECK(back.to_jsonl() == text);
    CHECK(back.events().size() == log.events().size());
    CHECK(back.head().seed == 5);
    CHECK(back.head().config.at("n_txns") == "120");
    CHECK(trace_hash(back) == trace_hash(log));
}

TEST_CASE("every line is one JSON object and the first is the header")
{
    auto text = small_run(6).to_jsonl();
    auto first = text.substr(0, text.find('\n'));
    CHECK(first.find("\"schema\":\"transedge-trace\"") != std::string::npos);
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n';
    CHECK(lines == small_run(6).events().size() + 1);
}

TEST_CASE("foreign or broken traces are refused")
{
    CHECK_THROWS_AS(trace_log::from_jsonl(""), incomplete_trace);
    CHECK_THROWS_AS(trace_log::from_jsonl("{\"schema\":\"other\"}\n"), incomplete_trace);
    CHECK_THROWS_AS(trace_log::from_jsonl("not json\n"), incomplete_trace);
    auto text = small_run(7).to_jsonl();
    auto header = text.substr(0, text.find('\n') + 1);
    CHECK_NOTHROW(trace_log::from_jsonl(header));
    CHECK_THROWS_AS(trace_log::from_jsonl(header + "{\"event\":\"teleport\"}\n"), incomplete_trace);
}

TEST_CASE("trace hash separates seeds")
{
    CHECK(trace_hash(small_run(8)) == trace_hash(small_run(8)));
    CHECK(trace_hash(small_run(8)) != trace_hash(small_run(9)));
}
