// Detects one 4x4 16-QAM vector sent over a random channel and prints the
// decision next to the transmitted symbols.

#include <cstdio>

#include "kbest/simkit.hpp"

int main() {
    using namespace kbest;
    DetectorConfig cfg;
    cfg.n_t = cfg.n_r = 4;
    cfg.m = 16;

    sim::Engine rng = sim::trial_engine(42, 0);
    const sim::Bits bits = sim::sample_bits(rng, cfg.n_t * cfg.bits_per_symbol());
    const CVector s = sim::qam_modulate(bits, cfg.m);
    const CMatrix h = sim::sample_channel(rng, cfg.n_r, cfg.n_t);
    const double n0 = 0.5;
    CVector y = h * s;
    const CVector noise = sim::sample_noise(rng, cfg.n_r, n0);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += noise[i];

    const Decision d = lr_kbest_receive(h, y, n0, cfg);
    for (std::size_t i = 0; i < s.size(); ++i)
        std::printf("sent %+g%+gi  decided %+g%+gi\n", s[i].real(), s[i].imag(), d.symbols[i].real(),
                    d.symbols[i].imag());
    std::printf("nodes %zu (budget %zu), best ped %.6g\n", d.detection.total_nodes, cfg.total_node_budget(),
                d.detection.candidates.front().ped);
}
