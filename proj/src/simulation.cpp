#include "reclink/simulation.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "reclink/errors.hpp"
#include "reclink/parallel.hpp"

namespace reclink {

namespace {

using namespace std::chrono;

constexpr double kIncomeThreshold = 500.0;
constexpr sys_days kReferenceDate = sys_days{year{2020} / January / 1};

std::string format_date(year_month_day d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

year_month_day parse_date(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(text.c_str(), "%d-%u-%u", &y, &m, &d) != 3) throw ValidationError("bad date '" + text + "'");
    return year{y} / month{m} / day{d};
}

std::string dob_from_age(double age_years) {
    const auto days_back = static_cast<long>(std::llround(age_years * 365.25));
    return format_date(year_month_day{kReferenceDate - days{days_back}});
}

double bernoulli(Rng& rng, double p) { return uniform01(rng) < p ? 1.0 : 0.0; }

std::vector<Value> block_values(Rng& rng) {
    std::normal_distribution<double> income(50000.0, 10000.0);
    const double region = static_cast<double>(1 + uniform_index(rng, 4));
    const double status = bernoulli(rng, 0.8);
    const double trauma = bernoulli(rng, 0.5);
    return {region, status, trauma, income(rng)};
}

std::vector<Value> record_values(Rng& rng) {
    std::normal_distribution<double> age(30.0, 4.0);
    const std::string dob = dob_from_age(age(rng));
    return {dob, bernoulli(rng, 0.5)};
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void ErrorRates::validate() const {
    for (double e : {region, income, dob})
        if (!(e >= 0.0 && e < 1.0)) throw ValidationError("error rates must lie in [0, 1)");
}

void SimulationConfig::validate() const {
    if (S < 1 || T < 1 || n1s < 1 || n2t < 1) throw ValidationError("block counts and sizes must be >= 1");
    if (S > T) throw ValidationError("simulation needs S <= T");
    if (nm < 0 || nm > std::min(n1s, n2t)) throw ValidationError("true links per block pair must lie in [0, min(n1s, n2t)]");
    if (replicates < 1) throw ValidationError("replicates must be >= 1");
    errors.validate();
}

ComparisonSchema simulation_schema(bool day_included) {
    ComparisonSchema schema;
    schema.block = {ComparisonSpec::binary("region"), ComparisonSpec::binary("status"),
                    ComparisonSpec::binary("trauma"), ComparisonSpec::absolute("income", kIncomeThreshold)};
    schema.record = {ComparisonSpec::ordinal("dob", day_included ? 4 : 3), ComparisonSpec::binary("gender")};
    return schema;
}

SimulatedData generate_dataset(const SimulationConfig& cfg, Rng& rng) {
    cfg.validate();
    const auto S = static_cast<std::size_t>(cfg.S), T = static_cast<std::size_t>(cfg.T);
    const auto n1 = static_cast<std::size_t>(cfg.n1s), n2 = static_cast<std::size_t>(cfg.n2t);
    const auto nm = static_cast<std::size_t>(cfg.nm);
    SimulatedData out;
    out.f1.file_id = "file1";
    out.f2.file_id = "file2";

    std::vector<int> perm(T);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    out.truth.blocks.assign(perm.begin(), perm.begin() + static_cast<long>(S));

    out.f2.blocks.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        Block& blk = out.f2.blocks[t];
        blk.id = "B" + std::to_string(t + 1);
        blk.values = block_values(rng);
        for (std::size_t j = 0; j < n2; ++j)
            blk.records.push_back({"b" + std::to_string(t + 1) + "_" + std::to_string(j + 1), record_values(rng), {}});
    }

    // Before shuffling, record k < nm of file-1 block s copies record
    // source[k] of its true partner block.
    out.f1.blocks.resize(S);
    std::vector<std::vector<std::size_t>> sources(S);
    for (std::size_t s = 0; s < S; ++s) {
        const Block& partner = out.f2.blocks[static_cast<std::size_t>(perm[s])];
        Block& blk = out.f1.blocks[s];
        blk.id = "A" + std::to_string(s + 1);
        blk.values = partner.values;
        std::vector<std::size_t> idx(n2);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t k = 0; k < nm; ++k) std::swap(idx[k], idx[k + uniform_index(rng, n2 - k)]);
        sources[s].assign(idx.begin(), idx.begin() + static_cast<long>(nm));
        for (std::size_t i = 0; i < n1; ++i) {
            const std::string id = "a" + std::to_string(s + 1) + "_" + std::to_string(i + 1);
            blk.records.push_back({id, i < nm ? partner.records[sources[s][i]].values : record_values(rng), {}});
        }
    }

    // Shuffle within blocks and translate the truth.
    std::vector<std::vector<std::size_t>> pos2(T);
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<std::size_t> order(n2);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<Record> shuffled;
        pos2[t].assign(n2, 0);
        for (std::size_t j = 0; j < n2; ++j) {
            shuffled.push_back(out.f2.blocks[t].records[order[j]]);
            pos2[t][order[j]] = j;
        }
        out.f2.blocks[t].records = std::move(shuffled);
    }
    for (std::size_t s = 0; s < S; ++s) {
        std::vector<std::size_t> order(n1);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<Record> shuffled;
        const auto t = static_cast<std::size_t>(perm[s]);
        for (std::size_t i = 0; i < n1; ++i) {
            shuffled.push_back(out.f1.blocks[s].records[order[i]]);
            if (order[i] < nm)
                out.truth.links.push_back({static_cast<int>(s), static_cast<int>(t), static_cast<int>(i),
                                           static_cast<int>(pos2[t][sources[s][order[i]]])});
        }
        out.f1.blocks[s].records = std::move(shuffled);
    }
    std::sort(out.truth.links.begin(), out.truth.links.end());

    if (cfg.analysis_columns) {
        out.f1.extra_columns = {"exposure"};
        out.f2.extra_columns = {"outcome"};
        for (auto& blk : out.f1.blocks)
            for (auto& r : blk.records) r.extras = {value_to_string(bernoulli(rng, 0.5))};
        std::vector<std::vector<int>> linked_exposure(T);
        for (std::size_t t = 0; t < T; ++t) linked_exposure[t].assign(n2, -1);
        for (const auto& l : out.truth.links)
            linked_exposure[static_cast<std::size_t>(l.t)][static_cast<std::size_t>(l.j)] =
                out.f1.blocks[static_cast<std::size_t>(l.s)].records[static_cast<std::size_t>(l.i)].extras[0] == "1";
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t j = 0; j < n2; ++j) {
                int x = linked_exposure[t][j];
                if (x < 0) x = bernoulli(rng, 0.5) > 0.0;
                out.f2.blocks[t].records[j].extras = {value_to_string(bernoulli(rng, logistic(-0.5 + 1.0 * x)))};
            }
        }
    }
    return out;
}

double income_noise_sd(double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError("income error rate must lie in [0, 1)");
    if (rate == 0.0) return 0.0;
    const boost::math::normal_distribution<double> z;
    return kIncomeThreshold / boost::math::quantile(z, 1.0 - rate / 2.0);
}

BlockedFile inject_errors(const BlockedFile& f1, const GroundTruth& truth, const ErrorRates& rates, Rng& rng) {
    rates.validate();
    BlockedFile out = f1;
    const double sd = income_noise_sd(rates.income);
    std::normal_distribution<double> noise(0.0, sd > 0.0 ? sd : 1.0);
    for (auto& blk : out.blocks) {
        if (rates.region > 0.0 && uniform01(rng) < rates.region)
            blk.values[0] = static_cast<double>(1 + uniform_index(rng, 4));
        if (sd > 0.0) blk.values[3] = std::get<double>(blk.values[3]) + noise(rng);
    }
    if (rates.dob > 0.0) {
        for (const auto& l : truth.links) {
            if (!(uniform01(rng) < rates.dob)) continue;
            auto& rec = out.blocks[static_cast<std::size_t>(l.s)].records[static_cast<std::size_t>(l.i)];
            auto& dob = std::get<std::string>(rec.values[0]);
            const year_month_day d = parse_date(dob);
            unsigned m = 1 + static_cast<unsigned>(uniform_index(rng, 11));
            if (m >= static_cast<unsigned>(d.month())) ++m;
            const auto last = year_month_day_last{d.year(), month_day_last{month{m}}}.day();
            const day dd = std::min(d.day(), last);
            dob = format_date(d.year() / month{m} / dd);
        }
    }
    return out;
}

LinkageMetrics evaluate_sample(const PosteriorSample& sample, const GroundTruth& truth) {
    LinkageMetrics m;
    std::size_t tp = 0;
    auto it = truth.links.begin();
    for (const auto& l : sample.links) {
        while (it != truth.links.end() && *it < l) ++it;
        if (it != truth.links.end() && *it == l) ++tp;
    }
    if (!std::is_sorted(sample.links.begin(), sample.links.end())) {
        // Fall back to a set lookup for unsorted input.
        tp = 0;
        const std::set<RecordLink> t(truth.links.begin(), truth.links.end());
        for (const auto& l : sample.links) tp += t.count(l);
    }
    m.tpr = truth.links.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(truth.links.size());
    if (sample.links.empty()) {
        m.ppv = 0.0;
        m.ppv_degenerate = true;
    } else {
        m.ppv = static_cast<double>(tp) / static_cast<double>(sample.links.size());
    }
    m.f1 = (m.tpr + m.ppv) > 0.0 ? 2.0 * m.tpr * m.ppv / (m.tpr + m.ppv) : 0.0;
    if (sample.blocked && !sample.blocks.empty()) {
        m.has_acc = true;
        std::size_t hits = 0;
        for (std::size_t s = 0; s < truth.blocks.size() && s < sample.blocks.size(); ++s)
            hits += sample.blocks[s] == truth.blocks[s];
        m.acc = static_cast<double>(hits) / static_cast<double>(truth.blocks.size());
    }
    return m;
}

void MetricAccumulator::add(const LinkageMetrics& m) {
    tpr += m.tpr;
    ppv += m.ppv;
    f1 += m.f1;
    acc += m.acc;
    has_acc = m.has_acc;
    degenerate += m.ppv_degenerate;
    ++count;
}

LinkageMetrics MetricAccumulator::mean() const {
    LinkageMetrics m;
    if (count == 0) return m;
    const double n = static_cast<double>(count);
    m.tpr = tpr / n;
    m.ppv = ppv / n;
    m.f1 = f1 / n;
    m.acc = acc / n;
    m.has_acc = has_acc;
    m.ppv_degenerate = degenerate == count;
    return m;
}

std::vector<ErrorRates> full_error_grid() {
    std::vector<ErrorRates> grid;
    for (double r : {0.0, 0.2, 0.4})
        for (double i : {0.0, 0.2, 0.4})
            for (double d : {0.0, 0.2, 0.4}) grid.push_back({r, i, d});
    return grid;
}

namespace {

void mean_sd(const std::vector<double>& x, double& mean, double& sd) {
    mean = x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
}

}  // namespace

std::vector<StudyRow> run_study(const StudyConfig& cfg, const std::function<void(const StudyRow&)>& on_row) {
    cfg.simulation.validate();
    cfg.chain.validate();
    for (const auto& e : cfg.grid) e.validate();
    const ComparisonSchema schema = simulation_schema(cfg.simulation.day_included);
    const auto reps = static_cast<std::size_t>(cfg.simulation.replicates);

    std::vector<StudyRow> rows;
    for (std::size_t cell = 0; cell < cfg.grid.size(); ++cell) {
        std::vector<std::vector<LinkageMetrics>> results(cfg.methods.size(), std::vector<LinkageMetrics>(reps));
        parallel_for(reps, cfg.threads, [&](std::size_t rep) {
            Rng data_rng = make_stream(cfg.simulation.seed, {stream::kDataset, rep});
            SimulatedData data = generate_dataset(cfg.simulation, data_rng);
            Rng err_rng = make_stream(cfg.simulation.seed, {stream::kErrors, cell, rep});
            const BlockedFile f1 = inject_errors(data.f1, data.truth, cfg.grid[cell], err_rng);
            for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
                ChainConfig chain = cfg.chain;
                chain.threads = 1;
                chain.seed = derive_seed(cfg.simulation.seed, {stream::kChain, cell, rep});
                MetricAccumulator acc;
                run_linkage(cfg.methods[mi], f1, data.f2, schema, cfg.hyper, chain,
                            [&](const PosteriorSample& s) { acc.add(evaluate_sample(s, data.truth)); });
                results[mi][rep] = acc.mean();
            }
        });
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            StudyRow row;
            row.errors = cfg.grid[cell];
            row.method = cfg.methods[mi];
            row.day_included = cfg.simulation.day_included;
            row.replicates = static_cast<int>(reps);
            row.per_replicate = results[mi];
            std::vector<double> tpr, ppv, f1, acc;
            for (const auto& m : results[mi]) {
                tpr.push_back(m.tpr);
                ppv.push_back(m.ppv);
                f1.push_back(m.f1);
                acc.push_back(m.acc);
                row.has_acc = m.has_acc;
            }
            mean_sd(tpr, row.tpr, row.tpr_sd);
            mean_sd(ppv, row.ppv, row.ppv_sd);
            mean_sd(f1, row.f1, row.f1_sd);
            mean_sd(acc, row.acc, row.acc_sd);
            if (on_row) on_row(row);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string study_csv_header() {
    return "eps_region,eps_income,eps_dob,method,day_included,replicates,tpr,ppv,f1,acc,tpr_sd,ppv_sd,f1_sd,acc_sd";
}

std::string study_csv_row(const StudyRow& r) {
    char buf[512];
    if (r.has_acc)
        std::snprintf(buf, sizeof buf, "%.1f,%.1f,%.1f,%s,%d,%d,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f",
                      r.errors.region, r.errors.income, r.errors.dob, std::string(to_string(r.method)).c_str(),
                      r.day_included ? 1 : 0, r.replicates, r.tpr, r.ppv, r.f1, r.acc, r.tpr_sd, r.ppv_sd, r.f1_sd,
                      r.acc_sd);
    else
        std::snprintf(buf, sizeof buf, "%.1f,%.1f,%.1f,%s,%d,%d,%.4f,%.4f,%.4f,,%.4f,%.4f,%.4f,",
                      r.errors.region, r.errors.income, r.errors.dob, std::string(to_string(r.method)).c_str(),
                      r.day_included ? 1 : 0, r.replicates, r.tpr, r.ppv, r.f1, r.tpr_sd, r.ppv_sd, r.f1_sd);
    return buf;
}

}  // namespace reclink
