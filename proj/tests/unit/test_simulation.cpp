#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <set>

#include "reclink/errors.hpp"
#include "reclink/simulation.hpp"

using namespace reclink;

namespace {

int month_of(const Value& v) { return std::stoi(std::get<std::string>(v).substr(5, 2)); }
int year_of(const Value& v) { return std::stoi(std::get<std::string>(v).substr(0, 4)); }

}  // namespace

TEST(Generator, FullScaleCounts) {
    SimulationConfig cfg;
    Rng rng(1);
    const auto data = generate_dataset(cfg, rng);
    EXPECT_EQ(data.f1.record_count(), 600u);
    EXPECT_EQ(data.f2.record_count(), 1200u);
    EXPECT_EQ(data.truth.blocks.size(), 30u);
    EXPECT_EQ(data.truth.links.size(), 450u);
    EXPECT_NO_THROW(BlockAssignment(data.truth.blocks, 40));
    EXPECT_EQ(data.f1.extra_columns, std::vector<std::string>{"exposure"});
    EXPECT_EQ(data.f2.extra_columns, std::vector<std::string>{"outcome"});
}

TEST(Generator, TruthPairsAgreeEverywhereBeforeErrors) {
    SimulationConfig cfg;
    cfg.S = 6;
    cfg.T = 8;
    cfg.day_included = true;
    Rng rng(2);
    const auto data = generate_dataset(cfg, rng);
    const auto cube = build_comparison_cube(data.f1, data.f2, simulation_schema(true));
    for (std::size_t s = 0; s < 6; ++s)
        for (auto l : cube.block_levels(s, static_cast<std::size_t>(data.truth.blocks[s]))) EXPECT_EQ(l, 1);
    for (const auto& l : data.truth.links) {
        const auto lv = cube.record_levels(static_cast<std::size_t>(l.s), static_cast<std::size_t>(l.t),
                                           static_cast<std::size_t>(l.i), static_cast<std::size_t>(l.j));
        EXPECT_EQ(lv[0], 3);
        EXPECT_EQ(lv[1], 1);
    }
}

TEST(Generator, RegionIsUniform) {
    SimulationConfig cfg;
    cfg.S = 1;
    cfg.T = 10000;
    cfg.n1s = 1;
    cfg.n2t = 1;
    cfg.nm = 0;
    cfg.analysis_columns = false;
    Rng rng(3);
    const auto data = generate_dataset(cfg, rng);
    std::array<double, 4> counts{};
    for (const auto& b : data.f2.blocks) counts[static_cast<std::size_t>(std::get<double>(b.values[0])) - 1] += 1;
    double chi2 = 0;
    for (double c : counts) chi2 += (c - 2500.0) * (c - 2500.0) / 2500.0;
    EXPECT_LT(chi2, 16.27);  // chi-square(3) upper 0.001 quantile
}

TEST(Generator, RejectsInvalidConfig) {
    SimulationConfig cfg;
    cfg.S = 50;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = {};
    cfg.nm = 21;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = {};
    cfg.errors.dob = 1.0;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg.errors.dob = -0.1;
    EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Generator, DatesAreValid) {
    SimulationConfig cfg;
    cfg.S = 5;
    cfg.T = 5;
    Rng rng(4);
    const auto data = generate_dataset(cfg, rng);
    for (const auto& b : data.f2.blocks)
        for (const auto& r : b.records) {
            const auto& d = std::get<std::string>(r.values[0]);
            ASSERT_EQ(d.size(), 10u);
            const int m = month_of(r.values[0]);
            EXPECT_GE(m, 1);
            EXPECT_LE(m, 12);
            EXPECT_GE(year_of(r.values[0]), 1960);
            EXPECT_LE(year_of(r.values[0]), 2010);
        }
}

TEST(Errors, ZeroRatesLeaveFileUnchanged) {
    SimulationConfig cfg;
    cfg.S = 4;
    cfg.T = 6;
    Rng rng(5);
    const auto data = generate_dataset(cfg, rng);
    const auto out = inject_errors(data.f1, data.truth, {}, rng);
    for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t p = 0; p < 4; ++p)
            EXPECT_EQ(value_to_string(out.blocks[s].values[p]), value_to_string(data.f1.blocks[s].values[p]));
        for (std::size_t i = 0; i < out.blocks[s].records.size(); ++i)
            EXPECT_EQ(value_to_string(out.blocks[s].records[i].values[0]),
                      value_to_string(data.f1.blocks[s].records[i].values[0]));
    }
}

TEST(Errors, IncomeNoiseScale) {
    EXPECT_NEAR(income_noise_sd(0.2), 390.15, 0.01);
    EXPECT_NEAR(income_noise_sd(0.4), 500.0 / 0.8416212335729143, 1e-9);
    EXPECT_EQ(income_noise_sd(0.0), 0.0);
    EXPECT_THROW(income_noise_sd(1.0), ValidationError);
}

TEST(Errors, IncomeFlipRateMatchesRate) {
    SimulationConfig cfg;
    cfg.S = 10000;
    cfg.T = 10000;
    cfg.n1s = 1;
    cfg.n2t = 1;
    cfg.nm = 0;
    cfg.analysis_columns = false;
    Rng rng(6);
    const auto data = generate_dataset(cfg, rng);
    const auto spec = ComparisonSpec::absolute("income", 500.0);
    for (double eps : {0.2, 0.4}) {
        const auto out = inject_errors(data.f1, data.truth, {0.0, eps, 0.0}, rng);
        int flips = 0;
        for (std::size_t s = 0; s < out.blocks.size(); ++s)
            flips += compare_values(out.blocks[s].values[3],
                                    data.f2.blocks[static_cast<std::size_t>(data.truth.blocks[s])].values[3], spec) == 0;
        EXPECT_NEAR(flips / 10000.0, eps, 0.03);
    }
}

TEST(Errors, RegionResampledAtRate) {
    SimulationConfig cfg;
    cfg.S = 10000;
    cfg.T = 10000;
    cfg.n1s = 1;
    cfg.n2t = 1;
    cfg.nm = 0;
    cfg.analysis_columns = false;
    Rng rng(7);
    const auto data = generate_dataset(cfg, rng);
    const auto out = inject_errors(data.f1, data.truth, {0.4, 0.0, 0.0}, rng);
    int changed = 0;
    for (std::size_t s = 0; s < out.blocks.size(); ++s)
        changed += value_to_string(out.blocks[s].values[0]) != value_to_string(data.f1.blocks[s].values[0]);
    // Re-sampling keeps the old value a quarter of the time.
    EXPECT_NEAR(changed / 10000.0, 0.4 * 0.75, 0.02);
}

TEST(Errors, DobMonthChangesOnTrueLinksOnly) {
    SimulationConfig cfg;
    cfg.S = 30;
    cfg.T = 40;
    Rng rng(8);
    const auto data = generate_dataset(cfg, rng);
    const auto out = inject_errors(data.f1, data.truth, {0.0, 0.0, 0.4}, rng);
    std::set<std::pair<int, int>> linked;
    for (const auto& l : data.truth.links) linked.insert({l.s, l.i});
    int changed = 0;
    for (std::size_t s = 0; s < out.blocks.size(); ++s)
        for (std::size_t i = 0; i < out.blocks[s].records.size(); ++i) {
            const auto& before = data.f1.blocks[s].records[i].values[0];
            const auto& after = out.blocks[s].records[i].values[0];
            if (!linked.count({static_cast<int>(s), static_cast<int>(i)})) {
                EXPECT_EQ(value_to_string(before), value_to_string(after));
                continue;
            }
            EXPECT_EQ(year_of(before), year_of(after));
            if (value_to_string(before) != value_to_string(after)) {
                ++changed;
                EXPECT_NE(month_of(before), month_of(after));
            }
        }
    EXPECT_NEAR(changed / 450.0, 0.4, 0.08);
}

TEST(Metrics, TruthScoresOne) {
    SimulationConfig cfg;
    cfg.S = 3;
    cfg.T = 4;
    Rng rng(9);
    const auto data = generate_dataset(cfg, rng);
    PosteriorSample s;
    s.blocks = data.truth.blocks;
    s.links = data.truth.links;
    const auto m = evaluate_sample(s, data.truth);
    EXPECT_EQ(m.tpr, 1.0);
    EXPECT_EQ(m.ppv, 1.0);
    EXPECT_EQ(m.f1, 1.0);
    EXPECT_EQ(m.acc, 1.0);
    EXPECT_TRUE(m.has_acc);
}

TEST(Metrics, EmptyLinkageIsFlagged) {
    GroundTruth truth;
    truth.blocks = {0};
    truth.links = {{0, 0, 0, 0}};
    PosteriorSample s;
    s.blocks = {0};
    const auto m = evaluate_sample(s, truth);
    EXPECT_EQ(m.tpr, 0.0);
    EXPECT_EQ(m.ppv, 0.0);
    EXPECT_TRUE(m.ppv_degenerate);
    EXPECT_EQ(m.f1, 0.0);
}

TEST(Metrics, HandCountedExample) {
    GroundTruth truth;
    truth.blocks = {0, 1};
    truth.links = {{0, 0, 0, 0}, {0, 0, 1, 1}, {1, 1, 0, 0}, {1, 1, 1, 1}};
    PosteriorSample s;
    s.blocks = {0, 1};
    s.links = {{0, 0, 0, 0}, {0, 0, 1, 2}, {1, 1, 1, 1}};
    const auto m = evaluate_sample(s, truth);
    EXPECT_DOUBLE_EQ(m.tpr, 0.5);
    EXPECT_DOUBLE_EQ(m.ppv, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.f1, 4.0 / 7.0);
    EXPECT_DOUBLE_EQ(m.acc, 1.0);
    s.blocked = false;
    EXPECT_FALSE(evaluate_sample(s, truth).has_acc);
}

TEST(Metrics, BoundedWithF1Identity) {
    Rng rng(10);
    GroundTruth truth;
    truth.blocks = {0, 1, 2};
    for (int s = 0; s < 3; ++s)
        for (int i = 0; i < 4; ++i) truth.links.push_back({s, s, i, i});
    for (int rep = 0; rep < 500; ++rep) {
        PosteriorSample s;
        s.blocks = {0, 1, 2};
        if (rep % 2) std::swap(s.blocks[0], s.blocks[1]);
        for (int b = 0; b < 3; ++b)
            for (int i = 0; i < 4; ++i)
                if (uniform01(rng) < 0.6) s.links.push_back({b, s.blocks[b], i, static_cast<int>(uniform_index(rng, 2)) == 0 ? i : (i + 1) % 4});
        std::sort(s.links.begin(), s.links.end());
        s.links.erase(std::unique(s.links.begin(), s.links.end(),
                                  [](auto& x, auto& y) { return x.s == y.s && x.j == y.j; }),
                      s.links.end());
        const auto m = evaluate_sample(s, truth);
        for (double v : {m.tpr, m.ppv, m.f1, m.acc}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        if (m.tpr + m.ppv > 0) EXPECT_NEAR(m.f1, 2 * m.tpr * m.ppv / (m.tpr + m.ppv), 1e-15);
        if (m.acc < 1.0) EXPECT_LT(m.tpr, 1.0);
    }
}

TEST(Study, SmallGridIsReproducibleAndThreadInvariant) {
    StudyConfig cfg;
    cfg.grid = {{0, 0, 0}, {0.4, 0.4, 0}};
    cfg.simulation.S = 3;
    cfg.simulation.T = 4;
    cfg.simulation.n1s = 6;
    cfg.simulation.n2t = 8;
    cfg.simulation.nm = 4;
    cfg.simulation.replicates = 3;
    cfg.chain.iterations = 40;
    cfg.chain.sweeps = 3;
    const auto a = run_study(cfg);
    cfg.threads = 3;
    const auto b = run_study(cfg);
    ASSERT_EQ(a.size(), 6u);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(study_csv_row(a[k]), study_csv_row(b[k]));
        EXPECT_EQ(a[k].per_replicate.size(), 3u);
        EXPECT_EQ(a[k].has_acc, a[k].method != Method::brl);
    }
    EXPECT_EQ(study_csv_header().substr(0, 35), "eps_region,eps_income,eps_dob,metho");
}

TEST(Study, FullGridHasTwentySevenCells) {
    const auto g = full_error_grid();
    EXPECT_EQ(g.size(), 27u);
    std::set<std::tuple<double, double, double>> cells;
    for (const auto& e : g) cells.insert({e.region, e.income, e.dob});
    EXPECT_EQ(cells.size(), 27u);
}
