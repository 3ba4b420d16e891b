#include <gtest/gtest.h>

#include <sstream>

#include "kbest/config.hpp"

using namespace kbest;

namespace {

RunManifest parse(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

std::size_t error_line(const std::string& text) {
    try {
        parse(text);
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        const auto pos = msg.find("line ");
        return pos == std::string::npos ? 0 : std::stoul(msg.substr(pos + 5));
    }
    return static_cast<std::size_t>(-1);
}

}  // namespace

TEST(Config, ParsesEverySection) {
    const RunManifest m = parse(R"(# comment
[link]
snr_db = 10, 12.5 ,15   # trailing comment
trials = 250
seed = 0x10
noiseless = false
threads = 2

[detector]
nt = 4
nr = 6
mod = 16
k = 3
rlimit = 5
arithmetic = s1.7.8
lll_delta = 0.99
regularize = no

[degradation]
fixed_format = s1.15.16
target_ber = 1e-2
)");
    EXPECT_EQ(m.link.snr_db, (std::vector<double>{10, 12.5, 15}));
    EXPECT_EQ(m.link.trials_per_snr, 250u);
    EXPECT_EQ(m.link.seed, 16u);
    EXPECT_EQ(m.link.threads, 2u);
    EXPECT_EQ(m.link.detector.n_t, 4u);
    EXPECT_EQ(m.link.detector.n_r, 6u);
    EXPECT_EQ(m.link.detector.m, 16u);
    EXPECT_EQ(m.link.detector.k, 3u);
    EXPECT_EQ(m.link.detector.rlimit, 5u);
    ASSERT_TRUE(m.link.detector.fixed.has_value());
    EXPECT_EQ(*m.link.detector.fixed, (QFormat{7, 8}));
    EXPECT_DOUBLE_EQ(m.link.detector.lll_delta, 0.99);
    EXPECT_FALSE(m.link.detector.regularize);
    EXPECT_EQ(m.fixed_format, (QFormat{15, 16}));
    EXPECT_DOUBLE_EQ(m.target_ber, 1e-2);
}

TEST(Config, DefaultsMatchTheReferenceDesign) {
    const RunManifest m = parse("[link]\nsnr_db = 20\n");
    const auto& d = m.link.detector;
    EXPECT_EQ(d.n_t, 8u);
    EXPECT_EQ(d.m, 64u);
    EXPECT_EQ(d.k, 4u);
    EXPECT_EQ(d.rlimit, 4u);
    EXPECT_FALSE(d.fixed.has_value());
    EXPECT_EQ(m.fixed_format, (QFormat{7, 8}));
    EXPECT_DOUBLE_EQ(m.target_ber, 1e-3);
}

TEST(Config, ErrorsNameTheLine) {
    EXPECT_EQ(error_line("[link]\nsnr_db = 1\nbogus = 3\n"), 3u);
    EXPECT_EQ(error_line("[link]\nsnr_db = 1\ntrials = -5\n"), 3u);
    EXPECT_EQ(error_line("[link]\nsnr_db = 1, x\n"), 2u);
    EXPECT_EQ(error_line("[wat]\n"), 1u);
    EXPECT_EQ(error_line("snr_db = 1\n"), 1u);
    EXPECT_EQ(error_line("[link]\nsnr_db = 1\n[detector]\narithmetic = q16\n"), 4u);
    EXPECT_EQ(error_line("[link]\nsnr_db 1\n"), 2u);
    EXPECT_EQ(error_line("[link\n"), 1u);
    EXPECT_EQ(error_line("[link]\ntrials = 5\n"), 0u);  // missing snr_db
    EXPECT_EQ(error_line("[link]\nsnr_db = 1\n[detector]\nmod = 8\n"), 0u);  // semantic validation
}

TEST(Config, WriteParseRoundTrip) {
    RunManifest m = parse("[link]\nsnr_db = 10.1, 20.25\ntrials = 7\nseed = 123456789012345\n"
                          "[detector]\nnt = 2\nnr = 3\nmod = 4\narithmetic = s1.5.10\n");
    m.command = "sweep";
    m.outputs = {"a.csv", "b.csv"};
    m.timestamp = "2024-01-01T00:00:00Z";
    std::ostringstream first;
    write_config(first, m);
    const RunManifest back = parse(first.str());
    std::ostringstream second;
    write_config(second, back);
    EXPECT_EQ(first.str(), second.str());
    EXPECT_EQ(back.outputs, m.outputs);
    EXPECT_EQ(back.command, "sweep");
    EXPECT_EQ(back.link.seed, 123456789012345u);
    EXPECT_EQ(back.link.snr_db, m.link.snr_db);
}
