#pragma once

#include "transedge/environment.hpp"
#include "transedge/workload.hpp"

#include <string>
#include <vector>

namespace transedge {

struct sim_config {
    workload::workload_config workload;
    net::net_config net;
    protocol_params protocol;
    std::int32_t n_clients = 16;
    std::string ro_mode = "transedge";
    bool mutant = false;
    std::string scheme = "keyed-hash";
    std::string faults;          // fault spec text, or "random" for a drawn plan with f per cluster
    bool unsafe_faults = false;
    sim_time ro_timeout = 1000;
    sim_time start_at = 50;      // clients wait for the genesis batch to be certified
    sim_time settle = 2000;      // keep running after the last reply so replicas catch up
    sim_time horizon = 3'600'000;
    std::uint64_t seed = 1;

    /// Consumes known keys; anything left over is an error.
    void apply(workload::config_map m);
    void validate() const;
    workload::config_map to_map() const;
};

struct scripted_txn {
    workload::generated_txn txn;
    std::int32_t client = 0;
    sim_time at = 0;
};

struct sim_result {
    trace::trace_log trace;
    bool completed = false;
    sim_time end = 0;
    std::uint64_t events = 0;
};

/// Runs one deployment to completion (or the horizon). With a script the
/// generated workload is replaced by the scripted transactions.
sim_result simulate(const sim_config& config, const std::vector<scripted_txn>* script = nullptr);

/// The fault spec a run actually uses ("random" expanded for its seed).
std::string resolve_faults(const sim_config& config);

} // namespace transedge
