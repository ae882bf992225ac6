#include "phasekit/experiments.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace pk = phasekit;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const pk::SpectralBasis1D> basis(int M) {
    return std::make_shared<const pk::SpectralBasis1D>(pk::build_basis(M));
}

pk::SimulationSpec spec(int M, pk::Scheme s, double tau, double A, double B, long steps = 1024) {
    pk::SimulationSpec sp;
    sp.dim = 2;
    sp.M = M;
    sp.params.scheme = s;
    sp.params.eps = 0.075;
    sp.params.gamma = 1.0;
    sp.params.tau = tau;
    sp.params.A = A;
    sp.params.B = B;
    sp.steps = steps;
    sp.seed = 1;
    return sp;
}

fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("phasekit_test_" + name);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(SplitMix64, ReferenceSequence) {
    pk::SplitMix64 rng(0);
    EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
    EXPECT_EQ(rng.next(), 0x06C45D188009454FULL);
}

TEST(RandomInitial, DeterministicAndBounded) {
    const auto b = basis(8);
    const auto a = pk::random_initial(2, *b, 1);
    const auto c = pk::random_initial(2, *b, 1);
    EXPECT_EQ(a, c);
    EXPECT_NE(a, pk::random_initial(2, *b, 2));

    const auto g = pk::random_grid_values(2, 8, 1);
    double mean = 0.0;
    for (double v : g.data()) {
        EXPECT_GT(v, -1.0);
        EXPECT_LT(v, 1.0);
        mean += v;
    }
    mean /= static_cast<double>(g.size());
    EXPECT_EQ(g.size(), 256u);
    EXPECT_GT(mean, -0.1);
    EXPECT_LT(mean, 0.1);
}

TEST(RunSimulation, ConstantStateHasZeroEnergy) {
    const auto ab = pk::stability_constants_unconditional(0.075, 1.0, pk::Scheme::sl_bdf2, pk::TruncatedDoubleWell{});
    auto sp = spec(8, pk::Scheme::sl_bdf2, 0.1, ab.A, ab.B, 50);
    sp.init = {pk::InitKind::preset, "ones", ""};
    const auto r = pk::run_simulation(sp, basis(8));
    ASSERT_EQ(r.ledger.size(), 50u);
    // rounding in the solves leaves O(1e-16) coefficients, so E ~ 1e-30
    for (const auto& row : r.ledger.rows()) {
        EXPECT_LE(row.E_eps, 1e-20);
        EXPECT_LE(row.E_mod, 1e-20);
    }
    EXPECT_TRUE(r.certified());
}

TEST(RunSimulation, SmallStepWithoutStabilizationIsCertified) {
    const auto r = pk::run_simulation(spec(31, pk::Scheme::sl_bdf2, 0.01, 0.0, 0.0), basis(31));
    EXPECT_EQ(r.ledger.size(), 1024u);
    EXPECT_TRUE(r.certified()) << r.violations.size() << " violations";
}

TEST(RunSimulation, LargeStepWithoutStabilizationFails) {
    const auto r = pk::run_simulation(spec(31, pk::Scheme::sl_bdf2, 10.0, 0.0, 0.0), basis(31));
    EXPECT_FALSE(r.certified());
}

TEST(RunSimulation, NonFiniteDataIsReportedAsBlowup) {
    auto sp = spec(6, pk::Scheme::sl_cn, 0.01, 0.0, 0.0, 10);
    pk::Field bad(2, 6);
    bad[3] = std::numeric_limits<double>::quiet_NaN();
    const auto r = pk::run_simulation(sp, basis(6), pk::TruncatedDoubleWell{}, bad);
    ASSERT_TRUE(r.blowup_step.has_value());
    EXPECT_EQ(*r.blowup_step, 1);
    EXPECT_FALSE(r.certified());
}

TEST(RunSimulation, BitIdenticalReruns) {
    const auto b = basis(12);
    const auto sp = spec(12, pk::Scheme::sl_cn, 0.05, 3.0, 2.0, 64);
    const auto r1 = pk::run_simulation(sp, b);
    const auto r2 = pk::run_simulation(sp, b);
    EXPECT_TRUE(r1.ledger == r2.ledger);
    EXPECT_EQ(r1.final_field, r2.final_field);
}

TEST(RunSimulation, SnapshotsAtRequestedSteps) {
    auto sp = spec(6, pk::Scheme::sl_bdf2, 0.01, 0.0, 0.0, 8);
    sp.snapshot_steps = {0, 3, 8};
    const auto r = pk::run_simulation(sp, basis(6));
    ASSERT_EQ(r.snapshots.size(), 3u);
    EXPECT_EQ(r.snapshots[1].step, 3);
    EXPECT_DOUBLE_EQ(r.snapshots[2].time, 0.08);
    EXPECT_EQ(r.snapshots[0].values.extent(), 12);
}

TEST(Scan, DegenerateGrid) {
    auto sp = spec(16, pk::Scheme::sl_bdf2, 0.01, 0.0, 0.0, 64);
    pk::ScanSpec scan;
    scan.taus = {0.001};
    scan.fixed_values = {0.0};
    scan.candidates = {0.0};
    const auto r = pk::scan_min_constant(sp, scan, basis(16));
    ASSERT_EQ(r.cells.size(), 1u);
    EXPECT_EQ(r.cells[0].min_constant, 0.0);
}

TEST(Scan, MinimumIsLeastPassingCandidate) {
    const auto b = basis(16);
    auto sp = spec(16, pk::Scheme::sl_bdf2, 1.0, 0.0, 0.0, 128);
    pk::ScanSpec scan;
    scan.taus = {1.0};
    scan.fixed_values = {0.0};
    scan.candidates = {0, 1, 2, 5, 10, 20, 50, 100, 200, 500};
    scan.jobs = 2;
    const auto r = pk::scan_min_constant(sp, scan, b);
    const double min_a = r.cells[0].min_constant;
    const auto phi0 = pk::make_initial(sp.init, 2, b, sp.seed);
    ASSERT_NE(min_a, pk::kScanNonePassed);
    for (double c : scan.candidates) {
        auto trial = sp;
        trial.params.A = c;
        if (c < min_a) EXPECT_FALSE(pk::passes_certificate(trial, b, phi0)) << c;
        if (c == min_a) EXPECT_TRUE(pk::passes_certificate(trial, b, phi0)) << c;
    }
}

TEST(Scan, SentinelWhenNothingPasses) {
    auto sp = spec(12, pk::Scheme::sl_bdf2, 10.0, 0.0, 0.0, 128);
    pk::ScanSpec scan;
    scan.taus = {10.0};
    scan.fixed_values = {0.0};
    scan.candidates = {0.0};
    const auto r = pk::scan_min_constant(sp, scan, basis(12));
    EXPECT_EQ(r.cells[0].min_constant, pk::kScanNonePassed);
    std::ostringstream os;
    r.write_csv(os);
    EXPECT_EQ(os.str(), "tau,fixed_name,fixed_value,min_constant\n10,B,0,-1\n");
}

TEST(Scan, DefaultCandidateSets) {
    const auto a = pk::default_A_candidates();
    EXPECT_EQ(a.size(), 6u + 9u + 9u);
    EXPECT_EQ(a.front(), 0.0);
    EXPECT_EQ(a.back(), 500.0);
    const auto bset = pk::default_B_candidates();
    EXPECT_EQ(bset.size(), 15u);
    EXPECT_EQ(bset.back(), 50.0);
}

TEST(Convergence, ReferenceRowHasZeroError) {
    auto sp = spec(8, pk::Scheme::sl_bdf2, 0.01, 10.0, 5.0);
    sp.params.eps = 0.2;
    pk::ConvergenceSpec conv;
    conv.T = 0.08;
    conv.taus = {0.02, 0.01};
    conv.reference_tau = 0.01;
    const auto t = pk::convergence_study(sp, conv, basis(8));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_GT(t.rows[0].l2_error, 0.0);
    EXPECT_EQ(t.rows[1].l2_error, 0.0);
    EXPECT_EQ(t.rows[1].h1_error, 0.0);
    EXPECT_FALSE(t.rows[0].l2_order.has_value());
}

TEST(Convergence, RejectsIncommensurateSteps) {
    auto sp = spec(6, pk::Scheme::sl_cn, 0.01, 0.0, 0.0);
    pk::ConvergenceSpec conv;
    conv.T = 1.0;
    conv.taus = {0.3};
    EXPECT_THROW(pk::convergence_study(sp, conv, basis(6)), std::invalid_argument);
    conv.taus = {0.25};
    conv.reference_tau = 0.3;
    EXPECT_THROW(pk::convergence_study(sp, conv, basis(6)), std::invalid_argument);
}

TEST(Convergence, CsvLeavesFirstOrderBlank) {
    pk::ConvergenceTable t;
    t.rows.push_back({0.02, 0.5, std::nullopt, 1.0, std::nullopt});
    t.rows.push_back({0.01, 0.125, 2.0, 0.25, 2.0});
    std::ostringstream os;
    t.write_csv(os);
    EXPECT_EQ(os.str(), "tau,l2_error,l2_order,h1_error,h1_order\n0.02,0.5,,1,\n0.01,0.125,2,0.25,2\n");
}

TEST(Snapshot, BinaryRoundTripAndHeader) {
    const auto b = basis(5);
    pk::Snapshot s{17, 0.17, pk::to_grid(pk::random_initial(3, *b, 4), *b)};
    const auto path = (temp_dir("snap") / "s.pfk").string();
    pk::write_snapshot(path, s);
    EXPECT_EQ(fs::file_size(path), 32u + 8u * 1000u);

    std::ifstream in(path, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    EXPECT_EQ(std::string(magic, 4), "PFK1");

    const auto back = pk::read_snapshot(path);
    EXPECT_EQ(back.step, 17);
    EXPECT_EQ(back.time, 0.17);
    EXPECT_EQ(back.values, s.values);
}

TEST(Snapshot, RejectsForeignFile) {
    const auto path = (temp_dir("snap") / "junk.bin").string();
    std::ofstream(path) << "not a snapshot at all, just text padding it out";
    EXPECT_THROW(pk::read_snapshot(path), std::runtime_error);
}

TEST(Snapshot, FileInitMatchesSource) {
    const auto b = basis(6);
    const auto u = pk::random_initial(2, *b, 9);
    const auto path = (temp_dir("snap") / "init.pfk").string();
    pk::write_snapshot(path, {0, 0.0, pk::to_grid(u, *b)});
    const auto v = pk::make_initial({pk::InitKind::file, "", path}, 2, b, 0);
    EXPECT_LE((u - v).max_abs(), 1e-12);
}

TEST(Snapshot, SliceExport) {
    const auto b = basis(4);
    const auto path3 = (temp_dir("snap") / "slices3.csv").string();
    // phi = x: the x=0 plane is identically zero
    pk::Field x(3, 4);
    x.at(1, 0, 0) = 1.0;
    pk::write_slices_csv(path3, x, *b);
    std::ifstream in(path3);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "plane,x,y,z,phi");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        if (line.rfind("x=0,", 0) == 0) EXPECT_NEAR(std::stod(line.substr(line.rfind(',') + 1)), 0.0, 1e-15);
    }
    EXPECT_EQ(rows, 3 * 8 * 8);
}

TEST(ParallelFor, RunsEveryIndexAndPropagatesErrors) {
    std::vector<int> hits(37, 0);
    pk::parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_THROW(pk::parallel_for(5, 3,
                                  [](std::size_t i) {
                                      if (i == 2) throw std::runtime_error("boom");
                                  }),
                 std::runtime_error);
}

TEST(Presets, RelaxedStateIsCachedAndSmoother) {
    const auto b = basis(12);
    const auto a = pk::make_initial({pk::InitKind::preset, "phi1", ""}, 2, b, 3);
    const auto c = pk::make_initial({pk::InitKind::preset, "phi1", ""}, 2, b, 3);
    EXPECT_EQ(a, c);
    const auto raw = pk::random_initial(2, *b, 3);
    EXPECT_LT(pk::energy_eps(a, 0.075, pk::TruncatedDoubleWell{}, *b),
              pk::energy_eps(raw, 0.075, pk::TruncatedDoubleWell{}, *b));
    EXPECT_THROW(pk::make_initial({pk::InitKind::preset, "nope", ""}, 2, b, 3), std::invalid_argument);
}
