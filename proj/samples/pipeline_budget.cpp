// Streams a few detections through the cycle model and prints the report for
// an 8x8 64-QAM design at 181.8 MHz.

#include <iostream>

#include "kbest/pipeline.hpp"
#include "kbest/simkit.hpp"

int main() {
    using namespace kbest;
    const DetectorConfig cfg;  // 8x8, 64-QAM, K = rlimit = 4
    std::vector<DetectTrace> traces(16);
    for (std::size_t v = 0; v < traces.size(); ++v) {
        sim::Engine rng = sim::trial_engine(3, v);
        const CVector s = sim::qam_modulate(sim::sample_bits(rng, 48), cfg.m);
        const CMatrix h = sim::sample_channel(rng, 8, 8);
        lr_kbest_receive(h, h * s, 1e-3, cfg, &traces[v]);
    }
    const PipelineRun run = pipeline_run(traces, cfg);
    std::cout << "vectors=" << traces.size() << " total_cycles=" << run.total_cycles << "\n";
    write_report_kv(std::cout, report(181.8e6, cfg, 63.75));
}
