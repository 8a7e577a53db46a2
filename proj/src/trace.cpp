#include "transedge/trace.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

using nlohmann::json;

namespace transedge {

// Enums travel as their names so foreign traces stay readable.
void to_json(json& j, txn_kind k) { j = std::string(to_string(k)); }
void from_json(const json& j, txn_kind& k) { k = txn_kind_from_string(j.get<std::string>()); }
void to_json(json& j, abort_reason r) { j = std::string(to_string(r)); }
void from_json(const json& j, abort_reason& r) { r = abort_reason_from_string(j.get<std::string>()); }
void to_json(json& j, vote v) { j = v == vote::yes ? "yes" : "no"; }
void from_json(const json& j, vote& v) { v = j.get<std::string>() == "yes" ? vote::yes : vote::no; }
void to_json(json& j, decision d) { j = d == decision::commit ? "commit" : "abort"; }
void from_json(const json& j, decision& d) { d = j.get<std::string>() == "commit" ? decision::commit : decision::abort; }
void to_json(json& j, prepare_role r) { j = r == prepare_role::coordinator ? "coordinator" : "participant"; }
void from_json(const json& j, prepare_role& r)
{
    r = j.get<std::string>() == "coordinator" ? prepare_role::coordinator : prepare_role::participant;
}

} // namespace transedge

namespace transedge::trace {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(header, version, partitions, f, seed, faults, faulty, unsafe, ro_mode, delta, config)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(read_version, key, version)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(submitted, t, txn, cls, kind, client, partitions)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(commit_requested, t, txn, kind, coordinator, partitions, reads, writes)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(prepared_item, txn, role, v, reason, conflicting)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(committed_item, txn, prepare_batch, d)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(rejected_item, txn, reason, conflicting)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(batch_installed, t, node, partition, index, digest_hex, lce, cd, timestamp, valid, local,
                                   prepared, committed, rejected)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(agreement_failed, t, partition, index, reason)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(reply, t, txn, client, committed, reason, partition, batch)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ro_round, t, txn, round, partition, node, ok, error, batch, lce, cd)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ro_read, key, partition, version, batch)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ro_done, t, txn, ok, mutant, rounds, round1_t, round1_partitions, round2_partitions, requests,
                                   retries, reads)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(messages, txn, counts)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(run_end, t, completed, events)

namespace {

constexpr const char* event_names[] = {"submitted", "commit_requested", "batch", "agreement_failed", "reply",
                                       "ro_round",  "ro_done",          "messages", "run_end"};
static_assert(std::size(event_names) == std::variant_size_v<event>);

template <std::size_t I = 0>
event parse_event(std::string_view name, const json& j)
{
    if constexpr (I == std::variant_size_v<event>) {
        throw incomplete_trace("unknown trace event: " + std::string(name));
    } else {
        if (name == event_names[I]) return j.get<std::variant_alternative_t<I, event>>();
        return parse_event<I + 1>(name, j);
    }
}

} // namespace

std::string trace_log::to_jsonl() const
{
    std::string out;
    json h = header_;
    h["event"] = "header";
    h["schema"] = "transedge-trace";
    out += h.dump();
    out += '\n';
    for (const auto& e : events_) {
        json j = std::visit([](const auto& v) { return json(v); }, e);
        j["event"] = event_names[e.index()];
        out += j.dump();
        out += '\n';
    }
    return out;
}

trace_log trace_log::from_jsonl(std::string_view text)
{
    std::istringstream in{std::string(text)};
    std::string line;
    trace_log log;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw incomplete_trace(std::string("malformed trace line: ") + e.what());
        }
        auto name = j.value("event", std::string{});
        if (name == "header") {
            if (j.value("schema", std::string{}) != "transedge-trace") throw incomplete_trace("not a transedge trace");
            log.header_ = j.get<header>();
            if (log.header_.version != schema_version) {
                throw incomplete_trace("unsupported trace schema version " + std::to_string(log.header_.version));
            }
            have_header = true;
            continue;
        }
        if (!have_header) throw incomplete_trace("trace has no header line");
        try {
            log.events_.push_back(parse_event(name, j));
        } catch (const json::exception& e) {
            throw incomplete_trace("bad " + name + " event: " + e.what());
        }
    }
    if (!have_header) throw incomplete_trace("trace has no header line");
    return log;
}

void trace_log::write(const std::string& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_jsonl();
}

trace_log trace_log::read(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_jsonl(ss.str());
}

std::string trace_hash(const trace_log& log)
{
    return crypto::to_hex(crypto::sha256(log.to_jsonl()));
}

} // namespace transedge::trace
