// Short BER sweep of the floating and 16-bit fixed detectors on a shared trial
// stream, written as CSV to stdout.

#include <iostream>

#include "kbest/simkit.hpp"

int main() {
    using namespace kbest;
    sim::LinkConfig link;
    link.detector.n_t = link.detector.n_r = 4;
    link.detector.m = 16;
    link.snr_db = {14, 18, 22, 26};
    link.trials_per_snr = 2000;
    link.seed = 7;

    DetectorConfig fixed = link.detector;
    fixed.fixed = QFormat{7, 8};
    const sim::Receiver rx[] = {sim::kbest_receiver(link.detector), sim::kbest_receiver(fixed)};
    const auto reports = sim::simulate(link, rx);

    std::cout << "# floating\n";
    sim::write_ber_csv(std::cout, reports[0]);
    std::cout << "# fixed s1.7.8\n";
    sim::write_ber_csv(std::cout, reports[1]);
}
