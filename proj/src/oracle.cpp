#include "transedge/oracle.hpp"

#include "transedge/readonly.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace transedge::oracle {

namespace {

using namespace trace;

template <class T, class F>
void each(const trace_log& log, F&& f)
{
    for (const auto& e : log.events())
        if (const auto* v = std::get_if<T>(&e)) f(*v);
}

std::set<node_id> faulty(const trace_log& log)
{
    return {log.head().faulty.begin(), log.head().faulty.end()};
}

// First honest copy of every (partition, index).
using canonical_log = std::map<partition_id, std::map<batch_id, const batch_installed*>>;

canonical_log canonical(const trace_log& log)
{
    auto bad = faulty(log);
    canonical_log out;
    each<batch_installed>(log, [&](const batch_installed& b) {
        if (bad.count(b.node)) return;
        out[b.partition].emplace(b.index, &b);
    });
    return out;
}

// Read-only ids served by the commit-free path. The baseline mode sends
// reads through commitment on purpose, so it has none.
std::set<txn_id> read_only_ids(const trace_log& log)
{
    std::set<txn_id> out;
    if (log.head().ro_mode != "transedge") return out;
    each<submitted>(log, [&](const submitted& s) {
        if (s.kind == txn_kind::read_only) out.insert(s.txn);
    });
    return out;
}

std::string str(txn_id t)
{
    return std::to_string(t);
}

void add(std::vector<finding>& out, const std::string& auditor, std::string detail)
{
    out.push_back({auditor, std::move(detail)});
}

} // namespace

// ---------------------------------------------------------------- history

history committed_history(const trace_log& log)
{
    key_partitioner partitioner(log.head().partitions);
    auto logs = canonical(log);

    // Where each transaction committed, per partition.
    std::map<txn_id, std::map<partition_id, batch_id>> commit_at;
    for (const auto& [p, batches] : logs) {
        for (const auto& [idx, b] : batches) {
            for (auto t : b->local) commit_at[t][p] = idx;
            for (const auto& c : b->committed)
                if (c.d == decision::commit) commit_at[c.txn][p] = idx;
        }
    }

    history h;
    each<commit_requested>(log, [&](const commit_requested& r) {
        auto it = commit_at.find(r.txn);
        if (it == commit_at.end()) return;
        history_txn t;
        t.id = r.txn;
        t.fp.id = r.txn;
        for (const auto& rv : r.reads) t.fp.reads.push_back({rv.key, {}, rv.version});
        for (const auto& k : r.writes) {
            auto at = it->second.find(partitioner(k));
            if (at == it->second.end()) {
                h.problems.push_back("txn " + str(r.txn) + " committed without installing its write to " + k);
                continue;
            }
            t.fp.writes.emplace_back(k, at->second);
        }
        h.txns[r.txn] = std::move(t);
    });
    each<ro_done>(log, [&](const ro_done& r) {
        if (!r.ok) return;
        history_txn t;
        t.id = r.txn;
        t.read_only = true;
        t.fp.id = r.txn;
        for (const auto& rv : r.reads) t.fp.reads.push_back({rv.key, {}, rv.version});
        h.txns[r.txn] = std::move(t);
    });

    // Every observed version must have a committed writer.
    std::set<std::pair<std::string, batch_id>> written;
    for (const auto& [id, t] : h.txns)
        for (const auto& w : t.fp.writes) written.insert(w);
    for (const auto& [id, t] : h.txns) {
        for (const auto& r : t.fp.reads) {
            if (r.version != no_batch && !written.count({r.key, r.version})) {
                h.problems.push_back("txn " + str(id) + " read " + r.key + "@" + std::to_string(r.version) +
                                     " which no committed transaction wrote");
            }
        }
    }
    return h;
}

// ---------------------------------------------------------------- SG

graph build_sg(const history& h)
{
    graph g;
    struct key_state {
        std::vector<std::pair<batch_id, txn_id>> writers;
        std::vector<std::pair<batch_id, txn_id>> readers;
    };
    std::unordered_map<std::string, key_state> keys;
    for (const auto& [id, t] : h.txns) {
        g.vertices.push_back(id);
        for (const auto& [k, v] : t.fp.writes) keys[k].writers.emplace_back(v, id);
        for (const auto& r : t.fp.reads) keys[r.key].readers.emplace_back(r.version, id);
    }
    std::vector<std::string> names;
    names.reserve(keys.size());
    for (const auto& [k, s] : keys) names.push_back(k);
    std::sort(names.begin(), names.end());

    for (const auto& k : names) {
        auto& s = keys[k];
        std::sort(s.writers.begin(), s.writers.end());
        std::sort(s.readers.begin(), s.readers.end());
        auto& w = s.writers;
        for (std::size_t i = 0; i < w.size(); ++i)
            for (std::size_t j = i + 1; j < w.size(); ++j)
                if (w[i].first < w[j].first) g.edges.push_back({w[i].second, w[j].second, conflict::edge_type::ww, k});
        for (const auto& [rv, reader] : s.readers) {
            // Writers are sorted by version: those equal to rv wrote what was
            // read, those above overwrote it.
            auto lo = std::lower_bound(w.begin(), w.end(), std::make_pair(rv, txn_id{0}));
            for (auto it = lo; it != w.end(); ++it) {
                if (it->second == reader) continue;
                if (it->first == rv) g.edges.push_back({it->second, reader, conflict::edge_type::wr, k});
                else g.edges.push_back({reader, it->second, conflict::edge_type::rw, k});
            }
        }
    }
    return g;
}

graph brute_force_sg(const history& h)
{
    graph g;
    std::vector<const history_txn*> all;
    for (const auto& [id, t] : h.txns) {
        g.vertices.push_back(id);
        all.push_back(&t);
    }
    for (const auto* a : all) {
        for (const auto* b : all) {
            if (a == b) continue;
            for (auto type : conflict::conflicts(a->fp, b->fp)) g.edges.push_back({a->id, b->id, type, {}});
        }
    }
    return g;
}

std::optional<cycle> find_cycle(const graph& g)
{
    std::unordered_map<txn_id, std::vector<std::pair<txn_id, conflict::edge_type>>> adj;
    for (const auto& e : g.edges) adj[e.from].emplace_back(e.to, e.type);
    enum class colour : std::uint8_t { white, grey, black };
    std::unordered_map<txn_id, colour> state;
    for (auto v : g.vertices) state[v] = colour::white;

    struct frame {
        txn_id v;
        std::size_t next;
    };
    for (auto root : g.vertices) {
        if (state[root] != colour::white) continue;
        std::vector<frame> stack{{root, 0}};
        std::vector<conflict::edge_type> via; // via[i]: edge from stack[i] to stack[i+1]
        state[root] = colour::grey;
        while (!stack.empty()) {
            auto& top = stack.back();
            const auto& out = adj[top.v];
            if (top.next == out.size()) {
                state[top.v] = colour::black;
                stack.pop_back();
                if (!via.empty()) via.pop_back();
                continue;
            }
            auto [to, type] = out[top.next++];
            auto& s = state[to];
            if (s == colour::grey) {
                cycle c;
                auto start = std::find_if(stack.begin(), stack.end(), [&](const frame& f) { return f.v == to; });
                for (auto it = start; it != stack.end(); ++it) c.txns.push_back(it->v);
                auto offset = static_cast<std::size_t>(start - stack.begin());
                c.types.assign(via.begin() + static_cast<std::ptrdiff_t>(offset), via.end());
                c.types.push_back(type);
                return c;
            }
            if (s == colour::white) {
                s = colour::grey;
                via.push_back(type);
                stack.push_back({to, 0});
            }
        }
    }
    return std::nullopt;
}

std::string describe(const cycle& c)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < c.txns.size(); ++i) {
        os << "t" << c.txns[i] << " -" << conflict::to_string(c.types[i]) << "-> ";
    }
    if (!c.txns.empty()) os << "t" << c.txns.front();
    return os.str();
}

// ---------------------------------------------------------------- auditors

void audit_safety(const trace_log& log, std::vector<finding>& out)
{
    auto bad = faulty(log);
    std::map<std::pair<partition_id, batch_id>, std::pair<std::string, node_id>> seen;
    each<batch_installed>(log, [&](const batch_installed& b) {
        if (bad.count(b.node)) return;
        auto [it, fresh] = seen.try_emplace({b.partition, b.index}, b.digest_hex, b.node);
        if (!fresh && it->second.first != b.digest_hex) {
            add(out, "safety",
                "partition " + std::to_string(b.partition) + " index " + std::to_string(b.index) + ": replicas " +
                    std::to_string(it->second.second) + " and " + std::to_string(b.node) + " installed different batches");
        }
    });
}

void audit_validity(const trace_log& log, std::vector<finding>& out)
{
    auto bad = faulty(log);
    each<batch_installed>(log, [&](const batch_installed& b) {
        if (!bad.count(b.node) && !b.valid) {
            add(out, "validity",
                "replica " + std::to_string(b.node) + " installed batch " + std::to_string(b.index) +
                    " it would not have produced");
        }
    });
}

void audit_log_shape(const trace_log& log, std::vector<finding>& out)
{
    auto bad = faulty(log);
    std::map<node_id, const batch_installed*> last;
    each<batch_installed>(log, [&](const batch_installed& b) {
        if (bad.count(b.node)) return;
        auto where = "replica " + std::to_string(b.node) + " batch " + std::to_string(b.index) + ": ";
        if (b.cd.size() != static_cast<std::size_t>(log.head().partitions)) add(out, "log_shape", where + "vector size");
        else if (b.cd[static_cast<std::size_t>(b.partition)] != b.index) add(out, "log_shape", where + "own entry is not the index");
        if (b.lce > b.index) add(out, "log_shape", where + "lce beyond index");
        auto& prev = last[b.node];
        if (!prev) {
            if (b.index != 0) add(out, "log_shape", where + "log does not start at 0");
        } else {
            if (b.index != prev->index + 1) add(out, "log_shape", where + "gap after " + std::to_string(prev->index));
            if (b.lce < prev->lce) add(out, "log_shape", where + "lce went backwards");
            for (std::size_t i = 0; i < b.cd.size() && i < prev->cd.size(); ++i)
                if (b.cd[i] < prev->cd[i]) add(out, "log_shape", where + "vector entry went backwards");
        }
        prev = &b;
    });
}

void audit_commit_order(const trace_log& log, std::vector<finding>& out)
{
    for (const auto& [p, batches] : canonical(log)) {
        batch_id drained = no_batch;                 // largest prepare batch committed so far
        std::map<batch_id, std::set<txn_id>> yes;     // prepare batch -> yes members
        std::map<batch_id, batch_id> group_commit;    // prepare batch -> where its group left
        for (const auto& [idx, b] : batches) {
            auto where = "partition " + std::to_string(p) + " batch " + std::to_string(idx) + ": ";
            batch_id top = no_batch;
            for (const auto& c : b->committed) {
                if (c.prepare_batch < drained) add(out, "commit_order", where + "group committed out of order");
                top = std::max(top, c.prepare_batch);
                auto [it, fresh] = group_commit.try_emplace(c.prepare_batch, idx);
                if (!fresh && it->second != idx) add(out, "commit_order", where + "prepare group split across batches");
                yes[c.prepare_batch].erase(c.txn);
            }
            if (top != no_batch) {
                if (b->lce != top) add(out, "commit_order", where + "lce is not the last drained group");
                drained = top;
            }
            for (const auto& e : b->prepared)
                if (e.v == vote::yes) yes[idx].insert(e.txn);
        }
        for (const auto& [g, left] : group_commit) {
            if (auto it = yes.find(g); it != yes.end() && !it->second.empty()) {
                add(out, "commit_order",
                    "partition " + std::to_string(p) + ": group " + std::to_string(g) + " left with members pending");
            }
        }
    }
}

void audit_atomicity(const trace_log& log, std::vector<finding>& out)
{
    auto logs = canonical(log);
    std::map<txn_id, std::map<partition_id, decision>> decided;
    std::map<txn_id, std::map<partition_id, vote>> votes;
    for (const auto& [p, batches] : logs) {
        for (const auto& [idx, b] : batches) {
            for (const auto& c : b->committed) decided[c.txn][p] = c.d;
            for (const auto& e : b->prepared) votes[e.txn][p] = e.v;
        }
    }
    std::map<txn_id, const commit_requested*> requests;
    each<commit_requested>(log, [&](const commit_requested& r) { requests[r.txn] = &r; });
    bool finished = false;
    each<run_end>(log, [&](const run_end& e) { finished = e.completed; });

    for (const auto& [t, ds] : decided) {
        std::set<decision> kinds;
        for (const auto& [p, d] : ds) kinds.insert(d);
        if (kinds.size() > 1) add(out, "atomicity", "txn " + str(t) + " committed at some partitions and aborted at others");
        auto req = requests.find(t);
        if (req == requests.end()) continue;
        if (kinds.count(decision::commit)) {
            for (auto p : req->second->partitions) {
                auto v = votes[t].find(p);
                if (v == votes[t].end() || v->second != vote::yes)
                    add(out, "atomicity", "txn " + str(t) + " committed without a yes vote from " + std::to_string(p));
                if (finished && !ds.count(p))
                    add(out, "atomicity", "txn " + str(t) + " never committed at partition " + std::to_string(p));
            }
        }
    }
}

void audit_abort_reasons(const trace_log& log, std::vector<finding>& out)
{
    static const std::set<abort_reason> refusals{abort_reason::stale_read, abort_reason::conflicts_in_progress,
                                                 abort_reason::conflicts_prepared, abort_reason::agreement_failed};
    each<reply>(log, [&](const reply& r) {
        if (r.committed && r.reason != abort_reason::none)
            add(out, "abort_reasons", "txn " + str(r.txn) + " committed with an abort reason");
        if (!r.committed && r.reason == abort_reason::none)
            add(out, "abort_reasons", "txn " + str(r.txn) + " aborted without a reason");
    });
    auto bad = faulty(log);
    each<batch_installed>(log, [&](const batch_installed& b) {
        if (bad.count(b.node)) return;
        for (const auto& r : b.rejected)
            if (!refusals.count(r.reason)) add(out, "abort_reasons", "txn " + str(r.txn) + " rejected for a bad reason");
        for (const auto& e : b.prepared)
            if (e.v == vote::no && !refusals.count(e.reason))
                add(out, "abort_reasons", "txn " + str(e.txn) + " voted no for a bad reason");
    });
}

void audit_batch_conflicts(const trace_log& log, std::vector<finding>& out)
{
    key_partitioner partitioner(log.head().partitions);
    struct access {
        std::set<std::string> reads, writes;
    };
    std::unordered_map<txn_id, access> acc;
    each<commit_requested>(log, [&](const commit_requested& r) {
        auto& a = acc[r.txn];
        for (const auto& rv : r.reads) a.reads.insert(rv.key);
        a.writes.insert(r.writes.begin(), r.writes.end());
    });
    for (const auto& [p, batches] : canonical(log)) {
        for (const auto& [idx, b] : batches) {
            std::vector<txn_id> active(b->local.begin(), b->local.end());
            for (const auto& e : b->prepared)
                if (e.v == vote::yes) active.push_back(e.txn);
            // owned key -> (writer, reader) sets
            std::map<std::string, std::pair<std::vector<txn_id>, std::vector<txn_id>>> touch;
            for (auto t : active) {
                auto it = acc.find(t);
                if (it == acc.end()) continue;
                for (const auto& k : it->second.writes)
                    if (partitioner(k) == p) touch[k].first.push_back(t);
                for (const auto& k : it->second.reads)
                    if (partitioner(k) == p && !it->second.writes.count(k)) touch[k].second.push_back(t);
            }
            for (const auto& [k, wr] : touch) {
                if (wr.first.size() > 1 || (wr.first.size() == 1 && !wr.second.empty())) {
                    add(out, "batch_conflicts",
                        "partition " + std::to_string(p) + " batch " + std::to_string(idx) + " admits conflicting txns on " + k);
                }
            }
        }
    }
}

void audit_non_interference(const trace_log& log, std::vector<finding>& out)
{
    auto ro = read_only_ids(log);
    if (ro.empty()) return;
    auto bad = faulty(log);
    each<batch_installed>(log, [&](const batch_installed& b) {
        if (bad.count(b.node)) return;
        auto check_member = [&](txn_id t) {
            if (ro.count(t)) add(out, "non_interference", "read-only txn " + str(t) + " appears in a batch");
        };
        auto check_blame = [&](txn_id by, txn_id victim) {
            if (ro.count(by)) {
                add(out, "non_interference", "txn " + str(victim) + " aborted because of read-only txn " + str(by));
            }
        };
        for (auto t : b.local) check_member(t);
        for (const auto& e : b.prepared) {
            check_member(e.txn);
            if (e.v == vote::no) check_blame(e.conflicting, e.txn);
        }
        for (const auto& c : b.committed) check_member(c.txn);
        for (const auto& r : b.rejected) {
            check_member(r.txn);
            check_blame(r.conflicting, r.txn);
        }
    });
}

void audit_two_round(const trace_log& log, std::vector<finding>& out)
{
    std::map<txn_id, std::map<partition_id, batch_header>> final_view;
    each<ro_round>(log, [&](const ro_round& r) {
        if (!r.ok) return;
        batch_header h;
        h.partition = r.partition;
        h.index = r.batch;
        h.lce = r.lce;
        h.cd = cd_vector(r.cd);
        final_view[r.txn][r.partition] = h;
    });
    each<ro_done>(log, [&](const ro_done& d) {
        if (d.rounds > 2) add(out, "two_round", "read-only txn " + str(d.txn) + " needed " + std::to_string(d.rounds) + " rounds");
        if (!d.ok || d.mutant) return;
        std::vector<batch_header> hs;
        for (const auto& [p, h] : final_view[d.txn]) hs.push_back(h);
        auto unmet = readonly::verify_dependencies(hs);
        if (!unmet.empty()) {
            add(out, "two_round",
                "read-only txn " + str(d.txn) + " finished with an unsatisfied dependency on partition " +
                    std::to_string(unmet.front().partition));
        }
        for (const auto& r : d.reads) {
            auto it = final_view[d.txn].find(r.partition);
            if (it == final_view[d.txn].end() || it->second.index != r.batch)
                add(out, "two_round", "read-only txn " + str(d.txn) + " returned a value outside its final view");
        }
    });
}

void audit_commit_freedom(const trace_log& log, std::vector<finding>& out)
{
    auto ro = read_only_ids(log);
    if (ro.empty()) return;
    std::unordered_map<txn_id, std::array<std::uint64_t, 4>> counts;
    each<messages>(log, [&](const messages& m) { counts[m.txn] = m.counts; });
    each<ro_done>(log, [&](const ro_done& d) {
        auto c = counts[d.txn];
        auto who = "read-only txn " + str(d.txn) + ": ";
        if (c[0] || c[1] || c[2]) add(out, "commit_freedom", who + "carried by consensus, 2PC or commit messages");
        if (c[3] != 2ULL * d.requests) add(out, "commit_freedom", who + "message count does not match its requests");
        if (d.retries == 0 && d.requests != d.round1_partitions + d.round2_partitions)
            add(out, "commit_freedom", who + "more exchanges than partitions asked");
    });
}

void audit_completion(const trace_log& log, std::vector<finding>& out)
{
    bool finished = false;
    each<run_end>(log, [&](const run_end& e) { finished = e.completed; });
    if (!finished) add(out, "completion", "run stopped at the horizon with clients still waiting");
    std::set<txn_id> done;
    each<reply>(log, [&](const reply& r) { done.insert(r.txn); });
    each<ro_done>(log, [&](const ro_done& r) {
        done.insert(r.txn);
        if (!r.ok) add(out, "completion", "read-only txn " + str(r.txn) + " gave up");
    });
    each<submitted>(log, [&](const submitted& s) {
        if (!done.count(s.txn)) add(out, "completion", "txn " + str(s.txn) + " never finished");
    });
}

std::size_t report::count(const std::string& auditor) const
{
    auto it = counts.find(auditor);
    return it == counts.end() ? 0 : it->second;
}

report check(const trace_log& log)
{
    report r;
    auto h = committed_history(log);
    for (const auto& p : h.problems) r.findings.push_back({"history", p});
    auto g = build_sg(h);
    r.vertices = g.vertices.size();
    r.edges = g.edges.size();
    r.sg_cycle = find_cycle(g);

    audit_safety(log, r.findings);
    audit_validity(log, r.findings);
    audit_log_shape(log, r.findings);
    audit_commit_order(log, r.findings);
    audit_atomicity(log, r.findings);
    audit_abort_reasons(log, r.findings);
    audit_batch_conflicts(log, r.findings);
    audit_non_interference(log, r.findings);
    audit_two_round(log, r.findings);
    audit_commit_freedom(log, r.findings);
    audit_completion(log, r.findings);
    for (const auto& f : r.findings) ++r.counts[f.auditor];
    return r;
}

} // namespace transedge::oracle
