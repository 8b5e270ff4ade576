// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code = number of
// failures.
//
// Flags:
//   --skip-trends   run only the exact/oracle criteria (1-7)
//   --only N        run a single criterion
//   --keep          keep the scratch directory

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ftcl/config.hpp"
#include "ftcl/runner.hpp"
#include "ftcl/trainer.hpp"
#include "support/test_support.hpp"

using namespace ftcl;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int id;
    std::string name;
    std::function<bool(std::string&)> run;
};

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

Matrix random_unit_rows(SeededRng& rng, std::size_t rows, std::size_t dim) {
    Matrix m(rows, dim);
    for (std::size_t i = 0; i < rows; ++i) {
        auto r = m.row(i);
        for (auto& x : r) x = rng.normal();
        l2_normalize_inplace(r);
    }
    return m;
}

// ---------------------------------------------------------------- 1
bool crit_score_identity(std::string& detail) {
    SeededRng rng(1001);
    const std::size_t dim = 64;
    double worst = 0.0, worst_end = 0.0;
    for (int t = 0; t < 10000; ++t) {
        Matrix pair = random_unit_rows(rng, 2, dim);
        const double s = dot(pair.row(0), pair.row(1));
        const double lambda = 2.0 * rng.u01();
        std::vector<double> a(dim), b(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            a[d] = lambda * pair(0, d) + (1.0 - lambda) * pair(1, d);
            b[d] = lambda * pair(1, d) + (1.0 - lambda) * pair(0, d);
        }
        const double got = dot(std::span<const double>(a), std::span<const double>(b));
        worst = std::max(worst, std::abs(got - transformed_pos_score(s, lambda)));

        for (std::size_t d = 0; d < dim; ++d) {
            a[d] = 2.0 * pair(0, d) - pair(1, d);
            b[d] = 2.0 * pair(1, d) - pair(0, d);
        }
        const double end = dot(std::span<const double>(a), std::span<const double>(b));
        worst_end = std::max(worst_end, std::abs(end - (-4.0 + 5.0 * s)));
    }
    std::ostringstream os;
    os << "max |score - 2l(1-l)(1-S)-S| = " << worst << ", lambda=2 endpoint err = " << worst_end;
    detail = os.str();
    return worst <= 1e-9 && worst_end <= 1e-9;
}

// ---------------------------------------------------------------- 2
bool crit_hardness_monotonicity(std::string& detail) {
    SeededRng rng(1002);
    const std::size_t dim = 32;
    std::size_t violations = 0;
    for (int t = 0; t < 10000; ++t) {
        Matrix pair = random_unit_rows(rng, 2, dim);
        FeatureVec zq{std::vector<double>(pair.row(0).begin(), pair.row(0).end()), true};
        FeatureVec zk{std::vector<double>(pair.row(1).begin(), pair.row(1).end()), true};
        const double s = dot(pair.row(0), pair.row(1));

        const double le = 1.0 + rng.u01();
        auto [eq, ek] = pos_extrapolate(zq, zk, le, false);
        if (dot(eq, ek) > s + 1e-12) ++violations;

        const double li = rng.u01();
        auto [iq, ik] = pos_interpolate(zq, zk, li, false);
        if (dot(iq, ik) < s - 1e-12) ++violations;
    }
    // hard negatives never lower any negative score
    SeededRng hrng(1003);
    Matrix queue = random_unit_rows(hrng, 64, dim);
    for (int t = 0; t < 200; ++t) {
        Matrix q = random_unit_rows(hrng, 1, dim);
        const double lambda = hrng.u01();
        const TransformedQueue hard = hard_negatives(q.row(0), queue, lambda, false);
        for (std::size_t i = 0; i < queue.rows(); ++i) {
            const double before = dot(q.row(0), queue.row(i));
            const double after = dot(q.row(0), hard.entries.row(i));
            if (after < before - 1e-12) ++violations;
        }
    }
    detail = "violations = " + std::to_string(violations) + " over 10k pos + 12.8k neg cases";
    return violations == 0;
}

// ---------------------------------------------------------------- 3
bool crit_gradient_correctness(std::string& detail) {
    SeededRng meta(1004);
    double worst = 0.0;
    int configs = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::uint64_t seed = 40000 + 13 * trial;
        SeededRng rng(seed);
        const std::size_t in_dim = 4 + rng.uniform_index(5);
        const std::size_t feat = 3 + rng.uniform_index(6);
        const std::size_t layers = rng.uniform_index(3); // 0..2 hidden layers
        std::vector<std::size_t> hidden;
        for (std::size_t l = 0; l < layers; ++l) hidden.push_back(4 + rng.uniform_index(61));
        const std::size_t bsz = 2 + rng.uniform_index(3);
        const std::size_t K = 4 + rng.uniform_index(8);
        const bool in_batch = trial % 4 == 3;

        FtConfig ft;
        switch (trial % 5) {
            case 0: break; // FT off
            case 1:
                ft.pos_mode = PosFtMode::extrapolate;
                break;
            case 2:
                ft.pos_mode = PosFtMode::extrapolate;
                ft.neg_mode = NegFtMode::interpolate;
                break;
            case 3:
                ft.pos_mode = PosFtMode::interpolate;
                ft.neg_mode = NegFtMode::extend;
                ft.renormalize = false;
                break;
            case 4:
                ft.pos_mode = PosFtMode::extrapolate;
                ft.neg_mode = NegFtMode::interpolate;
                ft.dimension_level = true;
                break;
        }
        ft.begin_epoch = 0;
        const bool ft_active = trial % 5 != 0;

        EncoderArch arch{in_dim, hidden, feat};
        SeededRng init = rng.stream(RngStream::encoder_init);
        EncoderParams params = init_encoder(arch, init);
        Matrix v_q(in_batch ? 2 * bsz : bsz, in_dim);
        for (std::size_t i = 0; i < v_q.size(); ++i) v_q.data()[i] = rng.normal();
        SeededRng qrng = rng.stream(RngStream::queue_init);
        MemoryQueue queue = MemoryQueue::random_init(K, feat, qrng);
        Matrix z_k = random_unit_rows(rng, bsz, feat);
        SeededRng ft_rng = rng.stream(RngStream::feature_transform, 0, 0);
        FtDraws draws = draw_ft(ft, bsz, in_batch ? 2 * bsz : K, feat, ft_rng);
        const double tau = 0.15 + 0.2 * rng.u01();

        Matrix zq_ref;
        if (!in_batch) {
            zq_ref = encoder_forward(params, v_q);
            normalize_rows(zq_ref);
        }
        auto loss_at = [&](const EncoderParams& p) {
            if (in_batch)
                return in_batch_pipeline_eval(p, v_q, ft, ft_active, draws, tau, false).loss;
            return momentum_pipeline_eval(p, v_q, z_k, queue, ft, ft_active, draws, tau, false,
                                          &zq_ref)
                .loss;
        };
        PipelineEval eval =
            in_batch
                ? in_batch_pipeline_eval(params, v_q, ft, ft_active, draws, tau, true)
                : momentum_pipeline_eval(params, v_q, z_k, queue, ft, ft_active, draws, tau,
                                         true, &zq_ref);

        const double h = 1e-5;
        double num = 0.0, den_an = 0.0, den_fd = 0.0;
        SeededRng pick(seed ^ 0x5555);
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            for (int probe = 0; probe < 12; ++probe) {
                const bool bias = probe >= 9;
                const std::size_t count =
                    bias ? params.layers[l].bias.size() : params.layers[l].weight.size();
                const std::size_t idx = pick.uniform_index(count);
                EncoderParams p = params;
                double* slot = bias ? &p.layers[l].bias[idx] : &p.layers[l].weight.data()[idx];
                *slot += h;
                const double up = loss_at(p);
                *slot -= 2 * h;
                const double dn = loss_at(p);
                const double fd = (up - dn) / (2 * h);
                const double an = bias ? eval.grads.layers[l].bias[idx]
                                       : eval.grads.layers[l].weight.data()[idx];
                num += (fd - an) * (fd - an);
                den_an += an * an;
                den_fd += fd * fd;
            }
        }
        const double rel =
            std::sqrt(num) / std::max({std::sqrt(den_an), std::sqrt(den_fd), 1e-12});
        worst = std::max(worst, rel);
        ++configs;
    }
    std::ostringstream os;
    os << "worst relative error " << worst << " over " << configs << " configurations";
    detail = os.str();
    return worst < 1e-5;
}

// ---------------------------------------------------------------- 4
bool crit_momentum_update(std::string& detail) {
    SeededRng rng(1005);
    EncoderArch arch{8, {6}, 4};
    SeededRng i1 = rng.stream(RngStream::encoder_init, 1);
    SeededRng i2 = rng.stream(RngStream::encoder_init, 2);
    EncoderParams q = init_encoder(arch, i1);
    EncoderParams k = init_encoder(arch, i2);

    auto equal_bits = [](const EncoderParams& a, const EncoderParams& b) {
        for (std::size_t l = 0; l < a.layers.size(); ++l) {
            for (std::size_t i = 0; i < a.layers[l].weight.size(); ++i)
                if (a.layers[l].weight.data()[i] != b.layers[l].weight.data()[i]) return false;
            for (std::size_t i = 0; i < a.layers[l].bias.size(); ++i)
                if (a.layers[l].bias[i] != b.layers[l].bias[i]) return false;
        }
        return true;
    };
    const bool fixed_m1 = equal_bits(momentum_update(k, q, 1.0), k);
    const bool fixed_m0 = equal_bits(momentum_update(k, q, 0.0), q);

    auto diff_norm = [](const EncoderParams& a, const EncoderParams& b) {
        double s = 0.0;
        for (std::size_t l = 0; l < a.layers.size(); ++l) {
            for (std::size_t i = 0; i < a.layers[l].weight.size(); ++i) {
                const double d = a.layers[l].weight.data()[i] - b.layers[l].weight.data()[i];
                s += d * d;
            }
            for (std::size_t i = 0; i < a.layers[l].bias.size(); ++i) {
                const double d = a.layers[l].bias[i] - b.layers[l].bias[i];
                s += d * d;
            }
        }
        return std::sqrt(s);
    };
    const double d0 = diff_norm(k, q);
    double worst = 0.0;
    EncoderParams cur = k;
    const double m = 0.9;
    for (int t = 1; t <= 30; ++t) {
        cur = momentum_update(std::move(cur), q, m);
        worst = std::max(worst, std::abs(diff_norm(cur, q) - std::pow(m, t) * d0));
    }
    std::ostringstream os;
    os << "fixed points " << (fixed_m1 && fixed_m0 ? "exact" : "BROKEN")
       << ", geometric-decay err " << worst;
    detail = os.str();
    return fixed_m1 && fixed_m0 && worst <= 1e-9;
}

// ---------------------------------------------------------------- 5
bool crit_telemetry_oracle(std::string& detail) {
    SeededRng rng(1006);
    double worst = 0.0;
    for (int t = 0; t < 3; ++t) {
        const std::size_t n = 64, k = 4096;
        std::vector<double> pos(n);
        for (auto& p : pos) p = 2.0 * rng.u01() - 1.0;
        Matrix neg(n, k);
        for (std::size_t i = 0; i < neg.size(); ++i) neg.data()[i] = 2.0 * rng.u01() - 1.0;
        const ScoreStatsRecord r = record_score_stats(pos, neg);

        double mean_pos = 0.0;
        for (double p : pos) mean_pos += p;
        mean_pos /= static_cast<double>(n);
        double mean_means = 0.0, mean_vars = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double m = 0.0;
            for (std::size_t j = 0; j < k; ++j) m += neg(i, j);
            m /= static_cast<double>(k);
            double v = 0.0;
            for (std::size_t j = 0; j < k; ++j) v += (neg(i, j) - m) * (neg(i, j) - m);
            v /= static_cast<double>(k);
            mean_means += m;
            mean_vars += v;
        }
        mean_means /= static_cast<double>(n);
        mean_vars /= static_cast<double>(n);
        worst = std::max({worst, std::abs(r.mean_pos - mean_pos),
                          std::abs(r.mean_neg - mean_means), std::abs(r.var_neg - mean_vars)});
    }
    std::ostringstream os;
    os << "max deviation from brute force = " << worst;
    detail = os.str();
    return worst <= 1e-12;
}

// ---------------------------------------------------------------- 6
bool crit_queue_semantics(std::string& detail) {
    SeededRng rng(1007);
    const std::size_t K = 32, D = 8;
    std::size_t mismatches = 0;
    for (int seq = 0; seq < 1000; ++seq) {
        MemoryQueue q(K, D);
        std::deque<std::vector<double>> oracle;
        const int rounds = 1 + static_cast<int>(rng.uniform_index(8));
        for (int round = 0; round < rounds; ++round) {
            const std::size_t bsz = 1 + rng.uniform_index(K);
            Matrix keys = random_unit_rows(rng, bsz, D);
            q.enqueue(keys);
            for (std::size_t i = 0; i < bsz; ++i) {
                oracle.emplace_back(keys.row(i).begin(), keys.row(i).end());
                if (oracle.size() > K) oracle.pop_front();
            }
        }
        const std::size_t valid = q.filled() ? K : q.cursor();
        if (valid != oracle.size()) {
            ++mismatches;
            continue;
        }
        std::vector<std::vector<double>> have, want(oracle.begin(), oracle.end());
        for (std::size_t i = 0; i < valid; ++i)
            have.emplace_back(q.entries().row(i).begin(), q.entries().row(i).end());
        std::sort(have.begin(), have.end());
        std::sort(want.begin(), want.end());
        if (have != want) ++mismatches;
    }
    detail = "mismatches vs reference ring buffer = " + std::to_string(mismatches) + " / 1000";
    return mismatches == 0;
}

// ---------------------------------------------------------------- 7
bool crit_determinism(std::string& detail, const fs::path& scratch) {
    RunConfig cfg;
    cfg.train.epochs = 3;
    cfg.train.batch_size = 32;
    cfg.train.queue_size = 128;
    cfg.train.seed = 2024;
    cfg.model.hidden_dims = {32};
    cfg.model.feature_dim = 16;
    cfg.data.synth_classes = 6;
    cfg.data.synth_per_class = 80;
    cfg.data.synth_dim = 24;
    cfg.aug.kind = AugKind::vector;
    cfg.aug.noise = 0.1;
    cfg.train.ft.pos_mode = PosFtMode::extrapolate;
    cfg.train.ft.neg_mode = NegFtMode::interpolate;
    cfg.train.ft.begin_epoch = 1;

    const auto a = run_pretrain(cfg, scratch / "det_a");
    const auto b = run_pretrain(cfg, scratch / "det_b");
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const bool bytes_equal = slurp(a.scores_csv) == slurp(b.scores_csv);

    RunConfig no_telemetry = cfg;
    no_telemetry.telemetry.enabled = false;
    const auto c = run_pretrain(no_telemetry, scratch / "det_c");
    bool trace_equal = a.loss_trace.size() == c.loss_trace.size();
    if (trace_equal)
        for (std::size_t i = 0; i < a.loss_trace.size(); ++i)
            trace_equal &= a.loss_trace[i] == c.loss_trace[i];

    detail = std::string("scores CSV bytes ") + (bytes_equal ? "identical" : "DIFFER") +
             "; telemetry on/off loss trace " + (trace_equal ? "bitwise equal" : "DIFFERS");
    return bytes_equal && trace_equal;
}

// ------------------------------------------------------------ trends

struct TrendData {
    fs::path train_images, train_labels, eval_images, eval_labels;
};

TrendData make_trend_dataset(const fs::path& scratch) {
    test_support::SynthImageParams p;
    p.classes = 10;
    p.per_class = 1000; // 10k training samples
    p.seed = 91;
    const Dataset train = test_support::make_synth_images(p);
    p.per_class = 200; // 2k held-out samples
    p.seed = 92;
    const Dataset eval = test_support::make_synth_images(p);
    TrendData t;
    std::tie(t.train_images, t.train_labels) =
        test_support::write_idx_dataset(train, scratch, "trend-train", 28);
    std::tie(t.eval_images, t.eval_labels) =
        test_support::write_idx_dataset(eval, scratch, "trend-eval", 28);
    return t;
}

RunConfig trend_base_config(const TrendData& data) {
    RunConfig cfg;
    cfg.train.epochs = 40;
    cfg.train.batch_size = 256;
    cfg.train.queue_size = 1024;
    cfg.train.tau = 0.07;
    cfg.train.momentum_m = 0.99;
    cfg.model.hidden_dims = {192, 96};
    cfg.model.feature_dim = 64;
    cfg.opt.lr = 0.06;
    cfg.data.source = "idx";
    cfg.data.idx_images = data.train_images.string();
    cfg.data.idx_labels = data.train_labels.string();
    cfg.data.eval_idx_images = data.eval_images.string();
    cfg.data.eval_idx_labels = data.eval_labels.string();
    cfg.aug.kind = AugKind::image;
    cfg.aug.shift = 3.0;
    cfg.aug.noise = 0.06;
    cfg.aug.erase_prob = 0.25;
    cfg.aug.erase_size = 6;
    cfg.telemetry.sample_n = 64;
    return cfg;
}

// pretrain + linear readout through the full artifact surface
double trend_accuracy(RunConfig cfg, std::uint64_t seed, const fs::path& out_dir) {
    cfg.train.seed = seed;
    const auto pre = run_pretrain(cfg, out_dir);
    const auto probe = run_probe(pre.checkpoint, cfg, out_dir / "probe");
    std::printf("        run %s seed %llu: accuracy %.4f\n",
                out_dir.filename().string().c_str(),
                static_cast<unsigned long long>(seed), probe.accuracy);
    std::fflush(stdout);
    return probe.accuracy;
}

std::vector<std::uint64_t> trend_seeds() { return {1, 2, 3}; }

double mean_accuracy(const RunConfig& cfg, const fs::path& dir, const std::string& tag) {
    double total = 0.0;
    for (std::uint64_t seed : trend_seeds())
        total += trend_accuracy(cfg, seed, dir / (tag + "_s" + std::to_string(seed)));
    return total / static_cast<double>(trend_seeds().size());
}

// ---------------------------------------------------------------- 8 & 9
struct FtTrendResult {
    double baseline = 0.0, both = 0.0, extra_only = 0.0, interp_only = 0.0;
    bool computed = false;
};

FtTrendResult ft_trend(const TrendData& data, const fs::path& scratch) {
    const RunConfig base = trend_base_config(data);

    RunConfig both = base;
    both.train.ft.pos_mode = PosFtMode::extrapolate;
    both.train.ft.alpha_ex = 2.0;
    both.train.ft.neg_mode = NegFtMode::interpolate;
    both.train.ft.alpha_in = 1.6;
    both.train.ft.begin_epoch = 2;

    RunConfig extra = base;
    extra.train.ft.pos_mode = PosFtMode::extrapolate;
    extra.train.ft.alpha_ex = 2.0;
    extra.train.ft.begin_epoch = 2;
    extra.telemetry.log_pre_ft = true; // dual-logged CSV feeds criterion 11

    RunConfig interp = extra;
    interp.train.ft.pos_mode = PosFtMode::interpolate;
    interp.telemetry.log_pre_ft = false;

    FtTrendResult r;
    r.baseline = mean_accuracy(base, scratch, "baseline");
    r.both = mean_accuracy(both, scratch, "ft_both");
    r.extra_only = mean_accuracy(extra, scratch, "pos_extra");
    r.interp_only = mean_accuracy(interp, scratch, "pos_interp");
    r.computed = true;
    return r;
}

// ---------------------------------------------------------------- 10
bool crit_momentum_sweep(std::string& detail, const TrendData& data, const fs::path& scratch) {
    RunConfig cfg = trend_base_config(data);
    cfg.data.limit = 6000;
    cfg.train.epochs = 24;

    std::map<double, double> acc;
    for (double m : {0.6, 0.9, 0.99, 1.0}) {
        RunConfig c = cfg;
        c.train.momentum_m = m;
        char tag[32];
        std::snprintf(tag, sizeof(tag), "m_%.2f", m);
        acc[m] = mean_accuracy(c, scratch, tag);
    }
    double best_m = 0.6, best = -1.0;
    for (const auto& [m, a] : acc)
        if (a > best) {
            best = a;
            best_m = m;
        }
    const bool interior = best_m != 1.0 && best_m != 0.6;
    const bool gap = best - acc[1.0] >= 0.02;
    std::ostringstream os;
    os << "acc(m): ";
    for (const auto& [m, a] : acc) os << m << "->" << a * 100 << "% ";
    os << "| best at m=" << best_m << ", gap to m=1: " << (best - acc[1.0]) * 100 << " pts";
    detail = os.str();
    return interior && gap;
}

// ---------------------------------------------------------------- 12
bool crit_extended_queue(std::string& detail, const TrendData& data, const fs::path& scratch) {
    RunConfig cfg = trend_base_config(data);
    cfg.data.limit = 6000;
    cfg.train.epochs = 24;
    cfg.train.ft.neg_mode = NegFtMode::interpolate;
    cfg.train.ft.alpha_in = 1.6;
    cfg.train.ft.begin_epoch = 2;

    RunConfig ext = cfg;
    ext.train.ft.neg_mode = NegFtMode::extend;

    const double acc_k = mean_accuracy(cfg, scratch, "neg_only");
    const double acc_2k = mean_accuracy(ext, scratch, "neg_union");

    // per-step loss computation time: transform + scores + loss
    SeededRng rng(1012);
    const std::size_t K = cfg.train.queue_size, D = cfg.model.feature_dim, B = 256;
    SeededRng qrng = rng.stream(RngStream::queue_init);
    MemoryQueue queue = MemoryQueue::random_init(K, D, qrng);
    Matrix zq = random_unit_rows(rng, B, D);
    Matrix zk = random_unit_rows(rng, B, D);
    static volatile double sink_guard; // keeps the timed work alive
    auto time_mode = [&](NegFtMode mode) {
        FtConfig ft;
        ft.neg_mode = mode;
        ft.alpha_in = 1.6;
        ft.begin_epoch = 0;
        double best = 1e300;
        for (int rep = 0; rep < 5; ++rep) {
            SeededRng frng = rng.stream(RngStream::feature_transform, 7, rep);
            const double t0 = now_seconds();
            double sink = 0.0;
            for (int it = 0; it < 10; ++it) {
                FtResult r = apply_ft(5, zq, zk, queue, ft, frng);
                ScoreSet s = pair_scores(r.z_q, r.z_k_pos, r.negatives);
                sink += info_nce_mean(s, 0.07);
            }
            const double dt = (now_seconds() - t0) / 10.0;
            sink_guard = sink;
            best = std::min(best, dt);
        }
        return best;
    };
    const double t_k = time_mode(NegFtMode::interpolate);
    const double t_2k = time_mode(NegFtMode::extend);
    const double ratio = t_2k / t_k;

    std::ostringstream os;
    os << "acc K=" << acc_k * 100 << "%, 2K=" << acc_2k * 100 << "% (|diff| "
       << std::abs(acc_k - acc_2k) * 100 << " pts); loss-time ratio " << ratio;
    detail = os.str();
    return std::abs(acc_k - acc_2k) <= 0.01 && ratio >= 1.5;
}

// ---------------------------------------------------------------- 11
bool crit_score_shift(std::string& detail, const fs::path& scratch) {
    // uses the dual-logged CSV of the pos-extrapolation run (seed 1)
    const fs::path csv = scratch / "pos_extra_s1" / "scores.csv";
    if (!fs::exists(csv)) {
        detail = "missing dual-logged CSV (criterion 8/9 runs must execute first)";
        return false;
    }
    const auto records = parse_scores_csv(csv);
    std::map<std::size_t, std::pair<double, double>> by_step; // step -> (pre, post)
    std::map<std::size_t, std::size_t> epoch_of;
    for (const auto& r : records) {
        epoch_of[r.step] = r.epoch;
        if (r.pre_ft) by_step[r.step].first = r.mean_pos;
        else by_step[r.step].second = r.mean_pos;
    }
    std::size_t checked = 0, violations = 0;
    for (const auto& [step, pair] : by_step) {
        if (epoch_of[step] < 2) continue; // FT begins at epoch 2
        ++checked;
        if (!(pair.second < pair.first)) ++violations;
    }
    std::ostringstream os;
    os << violations << " violations over " << checked << " post-begin steps";
    detail = os.str();
    return checked > 0 && violations == 0;
}

} // namespace

int main(int argc, char** argv) {
    bool skip_trends = false;
    bool keep = false;
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--skip-trends") == 0) skip_trends = true;
        else if (std::strcmp(argv[i], "--keep") == 0) keep = true;
        else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    }

    const fs::path scratch =
        fs::temp_directory_path() / ("ftcl_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(scratch);

    TrendData trend_data;
    FtTrendResult ft_result;
    const bool want_trends = !skip_trends && (only == 0 || only >= 8);
    if (want_trends) trend_data = make_trend_dataset(scratch);

    std::vector<Criterion> criteria;
    criteria.push_back({1, "transformed-score identity and lambda=2 endpoint",
                        [](std::string& d) { return crit_score_identity(d); }});
    criteria.push_back({2, "hardness monotonicity of all transforms",
                        [](std::string& d) { return crit_hardness_monotonicity(d); }});
    criteria.push_back({3, "composite-loss gradients vs finite differences",
                        [](std::string& d) { return crit_gradient_correctness(d); }});
    criteria.push_back({4, "momentum update fixed points and geometric decay",
                        [](std::string& d) { return crit_momentum_update(d); }});
    criteria.push_back({5, "score statistics match brute force",
                        [](std::string& d) { return crit_telemetry_oracle(d); }});
    criteria.push_back({6, "queue FIFO semantics vs reference ring buffer",
                        [](std::string& d) { return crit_queue_semantics(d); }});
    criteria.push_back({7, "run determinism and observation-only telemetry",
                        [&](std::string& d) { return crit_determinism(d, scratch); }});
    if (want_trends) {
        criteria.push_back({8, "feature transformation beats the baseline", [&](std::string& d) {
                                if (!ft_result.computed)
                                    ft_result = ft_trend(trend_data, scratch);
                                std::ostringstream os;
                                os << "baseline " << ft_result.baseline * 100 << "%, +both FT "
                                   << ft_result.both * 100 << "% (gain "
                                   << (ft_result.both - ft_result.baseline) * 100 << " pts)";
                                d = os.str();
                                return ft_result.both - ft_result.baseline >= 0.01;
                            }});
        criteria.push_back({9, "positive interpolation hurts vs extrapolation",
                            [&](std::string& d) {
                                if (!ft_result.computed)
                                    ft_result = ft_trend(trend_data, scratch);
                                std::ostringstream os;
                                os << "extrapolation " << ft_result.extra_only * 100
                                   << "%, interpolation " << ft_result.interp_only * 100
                                   << "% (gap "
                                   << (ft_result.extra_only - ft_result.interp_only) * 100
                                   << " pts)";
                                d = os.str();
                                return ft_result.extra_only - ft_result.interp_only >= 0.01;
                            }});
        criteria.push_back({10, "interior-optimum momentum sweep", [&](std::string& d) {
                                return crit_momentum_sweep(d, trend_data, scratch);
                            }});
        criteria.push_back({11, "post-FT positive mean below pre-FT at every step",
                            [&](std::string& d) {
                                if (!ft_result.computed)
                                    ft_result = ft_trend(trend_data, scratch);
                                return crit_score_shift(d, scratch);
                            }});
        criteria.push_back({12, "extended-queue near-equivalence and cost", [&](std::string& d) {
                                return crit_extended_queue(d, trend_data, scratch);
                            }});
    }

    int failures = 0;
    for (auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        std::string detail;
        const double t0 = now_seconds();
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double dt = now_seconds() - t0;
        std::printf("[%s] criterion %2d: %s (%.2fs) -- %s\n", ok ? "PASS" : "FAIL", c.id,
                    c.name.c_str(), dt, detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }

    if (!keep) {
        std::error_code ec;
        fs::remove_all(scratch, ec);
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    else std::printf("all criteria passed\n");
    return failures;
}
