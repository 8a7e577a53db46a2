#pragma once

#include "transedge/conflict.hpp"
#include "transedge/trace.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

// Offline checks over a finished trace: the serializability graph and the
// protocol auditors. Everything here reads the trace only.
namespace transedge::oracle {

struct history_txn {
    txn_id id = 0;
    bool read_only = false;
    conflict::footprint fp;
};

/// Committed transactions with their read versions and installed write
/// versions, taken from the honest replicas' logs.
struct history {
    std::map<txn_id, history_txn> txns;
    std::vector<std::string> problems; // reads of versions nobody wrote, and the like
};

history committed_history(const trace::trace_log& log);

struct edge {
    txn_id from = 0;
    txn_id to = 0;
    conflict::edge_type type = conflict::edge_type::wr;
    std::string key;
};

struct graph {
    std::vector<txn_id> vertices;
    std::vector<edge> edges;
};

/// Per-key construction: writers ordered by version, readers attached to
/// the version they saw. Every conflicting pair gets its edge.
graph build_sg(const history& h);

/// The same edges by comparing every pair of footprints; quadratic, for
/// cross-checking build_sg on small histories.
graph brute_force_sg(const history& h);

struct cycle {
    std::vector<txn_id> txns;                  // txns[i] -> txns[i+1], closing back to txns[0]
    std::vector<conflict::edge_type> types;
};

std::optional<cycle> find_cycle(const graph& g);
std::string describe(const cycle& c);

struct finding {
    std::string auditor;
    std::string detail;
};

struct report {
    std::size_t vertices = 0;
    std::size_t edges = 0;
    std::optional<cycle> sg_cycle;
    std::vector<finding> findings;
    std::map<std::string, std::size_t> counts; // findings per auditor

    bool ok() const { return !sg_cycle && findings.empty(); }
    std::size_t count(const std::string& auditor) const;
};

// Individual auditors; each appends to `out`.
void audit_safety(const trace::trace_log& log, std::vector<finding>& out);
void audit_validity(const trace::trace_log& log, std::vector<finding>& out);
void audit_log_shape(const trace::trace_log& log, std::vector<finding>& out);
void audit_commit_order(const trace::trace_log& log, std::vector<finding>& out);
void audit_atomicity(const trace::trace_log& log, std::vector<finding>& out);
void audit_abort_reasons(const trace::trace_log& log, std::vector<finding>& out);
void audit_batch_conflicts(const trace::trace_log& log, std::vector<finding>& out);
void audit_non_interference(const trace::trace_log& log, std::vector<finding>& out);
void audit_two_round(const trace::trace_log& log, std::vector<finding>& out);
void audit_commit_freedom(const trace::trace_log& log, std::vector<finding>& out);
void audit_completion(const trace::trace_log& log, std::vector<finding>& out);

/// Serializability graph plus every auditor.
report check(const trace::trace_log& log);

} // namespace transedge::oracle
