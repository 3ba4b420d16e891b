#pragma once

// Cycle-level model of the detector hardware.
//
// Each level runs a two-phase FSM: K fill cycles (one parent's rlimit real-axis
// batch per cycle, loaded into register K_i; at the root the single parent's
// real-axis candidates take one fill cycle each) followed by rlimit sort/expand
// cycles (min-select over the K registers, pop, refill the popped register
// with the imaginary-axis sibling). One unit per level; units are chained
// through registers Reg1..Reg(n_t-1), so a new vector enters every
// K + rlimit cycles.
//
// The model re-times a detector trace. It never recomputes a node.

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbest/detector.hpp"

namespace kbest {

class ScheduleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StageSchedule {
    std::size_t k_cycles = 0;
    std::size_t rlimit_cycles = 0;

    std::size_t cycles_per_level() const { return k_cycles + rlimit_cycles; }

    static StageSchedule from(const DetectorConfig& cfg) { return {cfg.k, cfg.rlimit}; }
};

enum class FsmPhase { fill, sort_expand };

inline const char* to_string(FsmPhase p) { return p == FsmPhase::fill ? "fill" : "sort_expand"; }

struct FsmRecord {
    std::size_t cycle = 0;
    std::size_t stage = 1;  // 1-based hardware unit; stage s handles level n_t - s + 1
    std::size_t vector = 0;
    FsmPhase phase = FsmPhase::fill;
    std::size_t enable_index = 1;  // 1..K: register written (fill/refill) or popped (select)
    TraceEvent event{};
};

struct FsmTrace {
    std::vector<FsmRecord> records;
};

inline void write_fsm_csv(std::ostream& os, const FsmTrace& trace) {
    os << "cycle,stage,phase,enable_index,ped\n";
    char buf[64];
    for (const auto& r : trace.records) {
        std::snprintf(buf, sizeof buf, "%.17g", r.event.ped);
        os << r.cycle << ',' << r.stage << ',' << to_string(r.phase) << ',' << r.enable_index << ',' << buf << '\n';
    }
}

/// Assigns one level's trace events to cycles starting at `start_cycle`.
/// Pop j lands in sort cycle j (or is spread evenly when K > rlimit); each
/// refill shares its pop's cycle.
inline std::vector<FsmRecord> schedule_level(std::span<const TraceEvent> events, const DetectorConfig& cfg,
                                             std::size_t stage = 1, std::size_t start_cycle = 0,
                                             std::size_t vector = 0) {
    const StageSchedule sched = StageSchedule::from(cfg);
    std::size_t evaluated = 0;
    for (const auto& e : events)
        if (e.kind != TraceKind::select) ++evaluated;
    if (evaluated > cfg.level_node_budget())
        throw ScheduleError("level trace evaluates " + std::to_string(evaluated) + " nodes, budget is " +
                            std::to_string(cfg.level_node_budget()));

    std::vector<FsmRecord> out;
    out.reserve(events.size());
    std::size_t pops = 0;
    std::size_t last_pop_cycle = start_cycle;
    std::size_t last_pop_slot = 0;
    for (const auto& e : events) {
        FsmRecord rec;
        rec.stage = stage;
        rec.vector = vector;
        rec.event = e;
        switch (e.kind) {
            case TraceKind::real_batch:
                if (e.slot >= sched.k_cycles)
                    throw ScheduleError("register index " + std::to_string(e.slot) + " exceeds K registers");
                if (e.real_index >= cfg.rlimit) throw ScheduleError("real-axis index exceeds rlimit");
                rec.phase = FsmPhase::fill;
                rec.cycle = start_cycle + e.slot;
                rec.enable_index = e.slot + 1;
                break;
            case TraceKind::select: {
                if (pops >= cfg.k) throw ScheduleError("more than K selections in one level");
                const std::size_t slot =
                    cfg.k <= cfg.rlimit ? pops : pops * sched.rlimit_cycles / sched.k_cycles;
                rec.phase = FsmPhase::sort_expand;
                rec.cycle = start_cycle + sched.k_cycles + slot;
                if (e.slot >= cfg.k) throw ScheduleError("popped register exceeds K registers");
                rec.enable_index = e.slot + 1;
                last_pop_cycle = rec.cycle;
                last_pop_slot = e.slot;
                ++pops;
                break;
            }
            case TraceKind::imag_refill:
                if (pops == 0 || e.slot != last_pop_slot)
                    throw ScheduleError("imaginary refill without a preceding pop of the same register");
                rec.phase = FsmPhase::sort_expand;
                rec.cycle = last_pop_cycle;
                rec.enable_index = e.slot + 1;
                break;
        }
        out.push_back(rec);
    }
    return out;
}

struct Handoff {
    std::size_t vector;
    std::size_t from_stage;  // writes Reg<from_stage>
    std::size_t cycle;
};

struct PipelineRun {
    FsmTrace trace;
    std::size_t cycles_per_level = 0;
    std::size_t stages = 0;
    std::size_t total_cycles = 0;
    std::vector<std::size_t> entry_cycle;       // per vector
    std::vector<std::size_t> completion_cycle;  // per vector
    std::vector<Handoff> handoffs;
};

/// Timing skeleton for V vectors through n_t chained units.
inline PipelineRun pipeline_timing(std::size_t vectors, std::size_t stages, std::size_t cycles_per_level) {
    if (vectors < 1) throw std::invalid_argument("pipeline needs at least one vector");
    PipelineRun run;
    run.cycles_per_level = cycles_per_level;
    run.stages = stages;
    run.total_cycles = (vectors - 1 + stages) * cycles_per_level;
    for (std::size_t v = 0; v < vectors; ++v) {
        run.entry_cycle.push_back(v * cycles_per_level);
        run.completion_cycle.push_back((v + stages) * cycles_per_level);
        for (std::size_t s = 1; s < stages; ++s) run.handoffs.push_back({v, s, (v + s) * cycles_per_level});
    }
    return run;
}

/// Streams detector traces (one per vector) through the pipeline.
inline PipelineRun pipeline_run(std::span<const DetectTrace> traces, const DetectorConfig& cfg) {
    const std::size_t cpl = StageSchedule::from(cfg).cycles_per_level();
    PipelineRun run = pipeline_timing(traces.size(), cfg.n_t, cpl);
    for (std::size_t v = 0; v < traces.size(); ++v) {
        const auto& events = traces[v].events;
        std::size_t begin = 0;
        while (begin < events.size()) {
            const std::size_t level = events[begin].level;
            std::size_t end = begin;
            while (end < events.size() && events[end].level == level) ++end;
            if (level < 1 || level > cfg.n_t) throw ScheduleError("trace level out of range");
            const std::size_t stage = cfg.n_t - level + 1;
            const auto recs = schedule_level(std::span(events).subspan(begin, end - begin), cfg, stage,
                                             (v + stage - 1) * cpl, v);
            run.trace.records.insert(run.trace.records.end(), recs.begin(), recs.end());
            begin = end;
        }
    }
    std::stable_sort(run.trace.records.begin(), run.trace.records.end(),
                     [](const FsmRecord& a, const FsmRecord& b) { return a.cycle < b.cycle; });
    return run;
}

/// Rebuilds one vector's final candidate list from the register pops alone.
inline CandidateList replay_candidates(const FsmTrace& trace, std::size_t vector, std::size_t n_t) {
    std::vector<CandidateList> lists(n_t + 2);
    SearchNode root;
    root.level = n_t + 1;
    root.symbols.assign(n_t, GaussInt{});
    lists[n_t + 1] = {root};
    for (const auto& rec : trace.records) {
        if (rec.vector != vector || rec.event.kind != TraceKind::select) continue;
        const TraceEvent& e = rec.event;
        const CandidateList& parents = lists[e.level + 1];
        if (e.parent >= parents.size()) throw ScheduleError("replay: dangling parent index");
        SearchNode n;
        n.level = e.level;
        n.symbols = parents[e.parent].symbols;
        n.symbols[e.level - 1] = e.symbol;
        n.ped = e.ped;
        n.parent = e.parent;
        n.real_index = e.real_index;
        n.imag_index = e.imag_index;
        lists[e.level].push_back(std::move(n));
    }
    return lists[1];
}

// ---------------------------------------------------------------------------
// Throughput / latency / efficiency

struct PipelineReport {
    double frequency_hz = 0.0;
    double clock_period_s = 0.0;
    std::size_t cycles_per_level = 0;
    std::size_t stages = 0;
    std::size_t bits_per_vector = 0;
    double latency_per_level_s = 0.0;
    double total_latency_s = 0.0;
    double throughput_bps = 0.0;
    double gate_count_kg = 0.0;
    double nhe = 0.0;  // kG per Mb/s
};

inline PipelineReport report(double frequency_hz, const DetectorConfig& cfg, double gate_count_kg) {
    if (!(frequency_hz > 0.0)) throw std::invalid_argument("frequency must be positive");
    if (gate_count_kg < 0.0) throw std::invalid_argument("gate count must be nonnegative");
    PipelineReport r;
    r.frequency_hz = frequency_hz;
    r.clock_period_s = 1.0 / frequency_hz;
    r.cycles_per_level = StageSchedule::from(cfg).cycles_per_level();
    r.stages = cfg.n_t;
    r.bits_per_vector = cfg.n_t * cfg.bits_per_symbol();
    r.latency_per_level_s = static_cast<double>(r.cycles_per_level) / frequency_hz;
    r.total_latency_s = r.latency_per_level_s * static_cast<double>(r.stages);
    r.throughput_bps = static_cast<double>(r.bits_per_vector) * frequency_hz / static_cast<double>(r.cycles_per_level);
    r.gate_count_kg = gate_count_kg;
    r.nhe = gate_count_kg / (r.throughput_bps / 1e6);
    return r;
}

namespace detail {
inline std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}
}  // namespace detail

inline void write_report_kv(std::ostream& os, const PipelineReport& r) {
    using detail::fmt_g;
    os << "frequency_mhz=" << fmt_g(r.frequency_hz / 1e6) << '\n'
       << "clock_period_ns=" << fmt_g(r.clock_period_s * 1e9) << '\n'
       << "cycles_per_level=" << r.cycles_per_level << '\n'
       << "stages=" << r.stages << '\n'
       << "bits_per_vector=" << r.bits_per_vector << '\n'
       << "latency_per_level_us=" << fmt_g(r.latency_per_level_s * 1e6) << '\n'
       << "total_latency_us=" << fmt_g(r.total_latency_s * 1e6) << '\n'
       << "throughput_mbps=" << fmt_g(r.throughput_bps / 1e6) << '\n'
       << "gate_count_kg=" << fmt_g(r.gate_count_kg) << '\n'
       << "nhe_kg_per_mbps=" << fmt_g(r.nhe) << '\n';
}

inline void write_report_csv(std::ostream& os, const PipelineReport& r, bool header = true) {
    using detail::fmt_g;
    if (header)
        os << "frequency_mhz,clock_period_ns,cycles_per_level,stages,bits_per_vector,latency_per_level_us,"
              "total_latency_us,throughput_mbps,gate_count_kg,nhe_kg_per_mbps\n";
    os << fmt_g(r.frequency_hz / 1e6) << ',' << fmt_g(r.clock_period_s * 1e9) << ',' << r.cycles_per_level << ','
       << r.stages << ',' << r.bits_per_vector << ',' << fmt_g(r.latency_per_level_s * 1e6) << ','
       << fmt_g(r.total_latency_s * 1e6) << ',' << fmt_g(r.throughput_bps / 1e6) << ',' << fmt_g(r.gate_count_kg)
       << ',' << fmt_g(r.nhe) << '\n';
}

}  // namespace kbest
