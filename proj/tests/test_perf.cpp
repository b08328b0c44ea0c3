#include <doctest.h>

#include <random>

#include "anacore/perf.hpp"
#include "oracles.hpp"

using namespace anacore;

namespace {

EnergyLedger measured_run() {
  // Energy split of the 500-record benchmark run used throughout.
  EnergyLedger l;
  l.system_total_j = 0.78;
  l.fpga_board_j = 0.35;
  l.arm_cpu_j = 0.17;
  l.fpga_fabric_j = 0.10;
  l.dram_j = 0.056;
  l.asic_total_j = 0.096;
  l.asic_io_j = 0.032;
  l.asic_analog_j = 0.031;
  l.asic_digital_j = 0.033;
  l.runtime_s = 0.138;
  l.total_ops = 65.875e6;
  return l;
}

}  // namespace

TEST_CASE("peak throughput of the full chip is 32.768 Top/s") {
  PerfParams p;
  CHECK(peak_throughput(p) == 32.768e12);

  // Trivial shape: one synapse at 1 Hz does one MAC = 2 op/s.
  p.rows = 1;
  p.cols = 1;
  p.event_rate_hz = 1.0;
  CHECK(peak_throughput(p) == 2.0);

  // Linear in the event rate.
  p = PerfParams{};
  p.event_rate_hz /= 2;
  CHECK(peak_throughput(p) == 16.384e12);
}

TEST_CASE("effective vector-unrolled throughput is 52.4288 Gop/s") {
  PerfParams p;
  CHECK(effective_throughput(p) == doctest::Approx(52.4288e9).epsilon(1e-12));
  CHECK(peak_throughput(p) / effective_throughput(p) == doctest::Approx(625.0));

  // One synapse, one 1-second integration cycle: 2 op/s.
  p.rows = 1;
  p.cols = 1;
  p.integration_cycle_s = 1.0;
  CHECK(effective_throughput(p) == 2.0);
}

TEST_CASE("area efficiency is about 2.6 Top/s/mm^2") {
  PerfParams p;
  CHECK(area_efficiency(p) == doctest::Approx(2.6e12).epsilon(0.02));

  // Independent derivation: peak over 256*512 synapses of 96 um^2 each.
  const double array_mm2 = 256.0 * 512.0 * 96.0 * 1e-6;
  CHECK(array_mm2 == doctest::Approx(12.58).epsilon(0.001));
  CHECK(area_efficiency(p) == doctest::Approx(peak_throughput(p) / array_mm2));

  // Doubling the synapse area halves the efficiency.
  PerfParams big = p;
  big.synapse_area_um2 *= 2;
  CHECK(area_efficiency(big) == doctest::Approx(area_efficiency(p) / 2));
}

TEST_CASE("layer-formula operation counts") {
  const LayerGraph g = build_ecg_model(ChipConfig{});
  long long conv = 0;
  for (const auto& layer : g.layers) {
    if (const auto* c = std::get_if<Conv1dLayer>(&layer))
      conv = oracle::conv_ops(c->in_len, c->kernel, c->stride, c->out_channels);
  }
  CHECK(conv == 46592);
  CHECK(op_count(g) == 112028);

  LayerGraph no_mac;  // no multiply-accumulate layers at all
  no_mac.input_len = 1;
  no_mac.layers.emplace_back(ReluLayer{});
  CHECK(op_count(no_mac) == 0);
}

TEST_CASE("op_count matches the loop-nest oracle on random shapes") {
  std::mt19937_64 rng(59);
  std::uniform_int_distribution<int> dim(1, 40), ker(1, 9);
  for (int round = 0; round < 100; ++round) {
    LayerGraph g;
    long long want = 0;

    Conv1dLayer c;
    c.kernel = ker(rng);
    c.stride = ker(rng);
    c.in_len = c.kernel + dim(rng);
    c.out_channels = dim(rng) % 8 + 1;
    c.weights = SignedWeightMatrix(c.kernel, c.out_channels);
    g.input_len = c.in_len;
    g.layers.emplace_back(c);
    want += oracle::conv_ops(c.in_len, c.kernel, c.stride, c.out_channels);

    LinearLayer l;
    l.in_features = c.out_count();
    l.out_features = dim(rng);
    l.weights = SignedWeightMatrix(l.in_features, l.out_features);
    g.layers.emplace_back(l);
    want += oracle::linear_ops(l.in_features, l.out_features);

    g.layers.emplace_back(ReluLayer{});

    REQUIRE(op_count(g) == want);
  }
}

TEST_CASE("derived figures of the measured run") {
  const EnergyLedger l = measured_run();
  const EnergyReport r = energy_report(l, 500);

  CHECK(r.ops_per_second == doctest::Approx(477.4e6).epsilon(0.001));
  CHECK(r.asic_ops_per_joule == doctest::Approx(686.2e6).epsilon(0.001));
  // Published rounded figure: 689e6 op/J, within 1 percent.
  CHECK(r.asic_ops_per_joule == doctest::Approx(689e6).epsilon(0.01));
  CHECK(r.system_ops_per_joule == doctest::Approx(84.46e6).epsilon(0.001));
  CHECK(r.system_ops_per_joule == doctest::Approx(84e6).epsilon(0.01));
  CHECK(r.seconds_per_record == doctest::Approx(276e-6).epsilon(0.001));

  // Without a record count the per-record latency is left at zero.
  CHECK(energy_report(l, 0).seconds_per_record == 0.0);
}

TEST_CASE("ledger validation") {
  EnergyLedger l = measured_run();
  CHECK_NOTHROW(l.validate());

  // ASIC closure: 32 + 31 + 33 mJ = 96 mJ exactly.
  CHECK(l.asic_io_j + l.asic_analog_j + l.asic_digital_j ==
        doctest::Approx(l.asic_total_j));

  SUBCASE("closure violation beyond the tolerance") {
    l.asic_digital_j += 0.002;
    CHECK_THROWS_AS(l.validate(), std::invalid_argument);
    CHECK_NOTHROW(l.validate(0.01));
  }
  SUBCASE("component exceeding the system total") {
    l.fpga_board_j = 0.80;
    CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  }
  SUBCASE("non-positive runtime") {
    l.runtime_s = 0;
    CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  }
  SUBCASE("non-positive op count") {
    l.total_ops = 0;
    CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  }
}

TEST_CASE("report formatting") {
  const EnergyLedger l = measured_run();

  SUBCASE("text mentions both counts when conventions differ") {
    const std::string t = format_report_text(l, 500, 112028);
    CHECK(t.find("131750") != std::string::npos);  // 65.875e6 / 500
    CHECK(t.find("112028") != std::string::npos);
    CHECK(t.find("convention") != std::string::npos);
    CHECK(t.find("op/J") != std::string::npos);
  }
  SUBCASE("no note when the counts agree") {
    EnergyLedger same = l;
    same.total_ops = 112028.0 * 500;
    const std::string t = format_report_text(same, 500, 112028);
    CHECK(t.find("convention") == std::string::npos);
  }
  SUBCASE("csv carries the headline figures") {
    const std::string c = format_report_csv(l, 500, 112028);
    CHECK(c.find("quantity,value,unit") != std::string::npos);
    CHECK(c.find("asic energy efficiency") != std::string::npos);
    CHECK(c.find("time per record") != std::string::npos);
    CHECK(c.find("op/J") != std::string::npos);
  }
}
