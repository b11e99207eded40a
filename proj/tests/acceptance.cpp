// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset; the exit status is nonzero if any selected
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <span>
#include <sstream>

#include "hwcost/checkpoint.hpp"
#include "hwcost/cli.hpp"
#include "hwcost/dataset.hpp"
#include "hwcost/oracle.hpp"
#include "hwcost/tokenizer.hpp"
#include "hwcost/training.hpp"
#include "hwcost/util.hpp"
#include "model_check.hpp"
#include "reference.hpp"

using namespace hwcost;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

struct Outcome {
    bool pass;
    std::string detail;
};

// ---------------------------------------------------------------------------
// Shared learning setup

constexpr std::size_t kFunctions = 20000;
constexpr std::size_t kEpochs = 12;
constexpr std::size_t kPatience = 4;

struct Learning {
    std::vector<data::Sample> all;
    std::vector<ir::GraphFunction> functions;
    data::Split rp, util;
    tok::Vocabulary vocab_ops, vocab_operands;
    std::optional<train::EvalReport> conv_rp;  // default ConvStack, ops-only, register pressure
};

Learning& learning() {
    static std::optional<Learning> L;
    if (!L) {
        L.emplace();
        data::GeneratorConfig g;
        g.num_samples = kFunctions;
        g.seed = 7;
        L->all = data::generate(g, oracle::MachineConfig{});
        for (const auto& s : data::filter_kind(L->all, data::TargetKind::RegisterPressure))
            L->functions.push_back(ir::parse_function(s.ir_text));
        const std::array<double, 3> ratios{0.85, 0.05, 0.10};
        L->rp = data::split(data::filter_kind(L->all, data::TargetKind::RegisterPressure), ratios, 13);
        L->util = data::split(data::filter_kind(L->all, data::TargetKind::XpuUtilization), ratios, 13);
        std::vector<ir::GraphFunction> train_fs;
        for (const auto& s : L->rp.train) train_fs.push_back(ir::parse_function(s.ir_text));
        L->vocab_ops = tok::build_vocab(train_fs, tok::Mode::OpsOnly, 1);
        L->vocab_operands = tok::build_vocab(train_fs, tok::Mode::OpsAndOperands, 1);
    }
    return *L;
}

train::TrainConfig learning_config() {
    train::TrainConfig cfg;
    cfg.epochs = kEpochs;
    cfg.early_stop_patience = kPatience;
    cfg.seed = 1;
    cfg.on_epoch = [](std::size_t e, double tr, double va) {
        std::cerr << "    epoch " << e << " train_rmse " << tr << " val_rmse " << va << "\n";
    };
    return cfg;
}

train::EvalReport fit(const data::Split& s, model::ModelConfig c, const tok::Vocabulary& vocab, const char* label) {
    std::cerr << "  training " << label << " on " << s.train.size() << " samples\n";
    c.vocab_size = vocab.size();
    auto r = train::train(model::Model(c), s.train, s.val, learning_config(), vocab);
    auto report = train::evaluate(r.model, s.test, vocab);
    std::cerr << "  " << label << ": test rmse " << report.rmse << " (" << report.rmse_pct_of_range
              << "% of range), best epoch " << r.best_epoch << "\n";
    return report;
}

const train::EvalReport& conv_rp_report() {
    auto& L = learning();
    if (!L.conv_rp) L.conv_rp = fit(L.rp, model::ModelConfig{}, L.vocab_ops, "convstack/ops-only/register-pressure");
    return *L.conv_rp;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome gradients() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t checked = 0, skipped = 0;
    auto note = [&](const nn::GradCheckResult& r) {
        worst = std::max(worst, r.max_rel_error);
        checked += r.checked;
        skipped += r.skipped;
    };
    auto dot = [](std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        auto rand_vec = [&](std::size_t n) {
            nn::Buffer v(n);
            for (auto& x : v) x = u(rng);
            return v;
        };
        auto input = [&](std::vector<std::size_t> shape) {
            nn::Parameter p("input", shape);
            p.value.values = rand_vec(p.value.size());
            return p;
        };

        {  // embedding
            nn::Embedding e(7, 4);
            nn::init_uniform(e.table, 1, rng);
            std::vector<std::int32_t> ids{1, 3, 3, 0, 6, 2};
            auto w = rand_vec(24);
            nn::GradCheckProblem p;
            p.params = {&e.table};
            p.loss = [&] { return dot(e.forward(ids, 2, 3).values, w); };
            p.gradient = [&] { e.backward(ids, nn::DenseTensor({2, 3, 4}, w)); };
            note(nn::grad_check(p));
        }
        {  // conv1d
            nn::Conv1D c(3, 4, 1 + seed % 3);
            nn::init_uniform(c.kernel, 3 * c.kernel_size(), rng);
            c.bias.value.values = rand_vec(4);
            auto x = input({2, 6, 3});
            const std::size_t out_len = 6 - c.kernel_size() + 1;
            auto w = rand_vec(2 * out_len * 4);
            nn::GradCheckProblem p;
            p.params = {&c.kernel, &c.bias, &x};
            p.loss = [&] { return dot(c.forward(x.value, nullptr).values, w); };
            p.gradient = [&] {
                nn::Conv1D::Cache cache;
                auto y = c.forward(x.value, &cache);
                x.grad = c.backward(nn::DenseTensor(y.shape, w), cache);
            };
            note(nn::grad_check(p));
        }
        {  // dense
            nn::Dense d(5, 3);
            nn::init_uniform(d.weight, 5, rng);
            d.bias.value.values = rand_vec(3);
            auto x = input({4, 5});
            auto w = rand_vec(12);
            nn::GradCheckProblem p;
            p.params = {&d.weight, &d.bias, &x};
            p.loss = [&] { return dot(d.forward(x.value, nullptr).values, w); };
            p.gradient = [&] { x.grad = d.backward(nn::DenseTensor({4, 3}, w), x.value); };
            note(nn::grad_check(p));
        }
        {  // relu + max pooling
            auto x = input({2, 6, 3});
            const nn::PoolSpec pool = seed % 2 ? nn::PoolSpec{2, 2} : nn::PoolSpec{};
            const std::size_t out_len = pool.window ? 3 : 1;
            auto w = rand_vec(2 * out_len * 3);
            std::vector<std::uint8_t> mask;
            nn::MaxPoolCache pc;
            nn::GradCheckProblem p;
            p.params = {&x};
            p.loss = [&] { return dot(nn::maxpool1d_forward(nn::relu_forward(x.value, &mask), pool, &pc).values, w); };
            p.branch_signature = [&] {
                std::string bytes(mask.begin(), mask.end());
                for (auto a : pc.argmax) bytes += std::to_string(a) + ",";
                return fnv1a64(bytes);
            };
            p.gradient = [&] {
                auto y = nn::maxpool1d_forward(nn::relu_forward(x.value, &mask), pool, &pc);
                x.grad = nn::relu_backward(nn::maxpool1d_backward(nn::DenseTensor(y.shape, w), pc), mask);
            };
            note(nn::grad_check(p));
        }
        {  // masked mean
            auto x = input({2, 4, 3});
            std::vector<std::int32_t> ids{4, 5, 0, 0, 7, 7, 7, 0};
            auto w = rand_vec(6);
            nn::GradCheckProblem p;
            p.params = {&x};
            p.loss = [&] { return dot(nn::masked_mean_forward(x.value, ids, 0, nullptr).values, w); };
            p.gradient = [&] {
                std::vector<std::size_t> counts;
                nn::masked_mean_forward(x.value, ids, 0, &counts);
                x.grad = nn::masked_mean_backward(nn::DenseTensor({2, 3}, w), ids, 0, counts, 4);
            };
            note(nn::grad_check(p));
        }
        {  // gru
            nn::Gru g(3, 4);
            nn::init_uniform(g.w_ih, 3, rng);
            nn::init_uniform(g.w_hh, 4, rng);
            g.b_ih.value.values = rand_vec(12);
            g.b_hh.value.values = rand_vec(12);
            auto x = input({2, 5, 3});
            std::vector<std::size_t> lengths{5, 1 + seed % 5};
            auto w = rand_vec(8);
            nn::GradCheckProblem p;
            p.params = {&g.w_ih, &g.w_hh, &g.b_ih, &g.b_hh, &x};
            p.loss = [&] { return dot(g.forward(x.value, lengths, nullptr).values, w); };
            p.gradient = [&] {
                nn::Gru::Cache cache;
                g.forward(x.value, lengths, &cache);
                x.grad = g.backward(nn::DenseTensor({2, 4}, w), cache);
            };
            note(nn::grad_check(p));
        }
        {  // mse
            auto pred = input({6});
            auto target = rand_vec(6);
            nn::GradCheckProblem p;
            p.params = {&pred};
            p.loss = [&] { return nn::mse_loss(pred.value.values, target, nullptr); };
            p.gradient = [&] {
                std::vector<double> g;
                nn::mse_loss(pred.value.values, target, &g);
                pred.grad.values.assign(g.begin(), g.end());
            };
            note(nn::grad_check(p));
        }
        {  // full ConvStack
            model::Model m(ref::small_config(model::Architecture::ConvStack, seed));
            note(ref::check_model_gradient(m, seed));
        }
    }
    const double secs = seconds_since(t0);
    const bool pass = worst <= 1e-4 && secs < 60.0 && checked > 0;
    return {pass, "max rel error " + fmt("%.3g", worst) + " over " + std::to_string(checked) + " coordinates (" +
                      std::to_string(skipped) + " kink-straddling skipped), " + fmt("%.1f", secs) + " s"};
}

Outcome oracle_exact() {
    const auto t0 = Clock::now();
    data::GeneratorConfig g;
    g.num_samples = 500;
    g.seed = 7;
    const oracle::MachineConfig m;
    std::size_t small = 0, all_ok = 0, small_bad = 0;
    for (std::size_t i = 0; i < g.num_samples; ++i) {
        auto f = data::generate_function(g, i);
        const bool rp_ok = oracle::register_pressure(f, m) == ref::brute_force_pressure(f);
        const auto u = oracle::vector_alu_utilization(f, m);
        const auto slots = ref::count_slots(f);
        const bool util_ok = u.vector_slots == slots.vector && u.total_slots == slots.total;
        if (rp_ok && util_ok) ++all_ok;
        if (f.body.size() <= 6) {
            ++small;
            if (!rp_ok || !util_ok) ++small_bad;
        }
    }
    const double secs = seconds_since(t0);
    return {small > 0 && small_bad == 0 && secs < 60.0,
            std::to_string(small) + " functions with <=6 ops all exact; " + std::to_string(all_ok) + "/500 exact overall, " +
                fmt("%.1f", secs) + " s"};
}

Outcome round_trip() {
    const auto t0 = Clock::now();
    data::GeneratorConfig g;
    g.num_samples = 10000;
    g.seed = 7;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < g.num_samples; ++i) {
        auto f = data::generate_function(g, i);
        if (!(ir::parse_function(ir::emit_text(f)) == f)) ++bad;
    }
    auto samples = data::generate(g, oracle::MachineConfig{});
    const bool csv_ok = data::parse_csv(data::to_csv(samples)) == samples;
    const double secs = seconds_since(t0);
    return {bad == 0 && csv_ok && secs < 120.0, std::to_string(g.num_samples - bad) + "/10000 emit/parse, csv " +
                                                    (csv_ok ? "equal" : "DIFFERENT") + " over " +
                                                    std::to_string(samples.size()) + " rows, " + fmt("%.1f", secs) + " s"};
}

Outcome learning_scaled() {
    const auto t0 = Clock::now();
    auto& L = learning();
    const auto& rp = conv_rp_report();
    model::ModelConfig uc;
    uc.target_kind = data::TargetKind::XpuUtilization;
    auto util = fit(L.util, uc, L.vocab_ops, "convstack/ops-only/xpu-utilization");
    const double secs = seconds_since(t0);
    const bool pass = rp.rmse_pct_of_range <= 10.0 && util.rmse_pct_of_range <= 10.0 && secs <= 1800.0;
    return {pass, "register pressure " + fmt("%.2f", rp.rmse_pct_of_range) + "% of range (rmse " +
                      fmt("%.1f", rp.rmse) + ", exact " + fmt("%.1f", *rp.exact_match_pct) + "%), utilization " +
                      fmt("%.2f", util.rmse_pct_of_range) + "% (rmse " + fmt("%.4f", util.rmse) + "); " +
                      std::to_string(L.rp.train.size()) + "/" + std::to_string(L.rp.val.size()) + "/" +
                      std::to_string(L.rp.test.size()) + " split, " + fmt("%.0f", secs) + " s"};
}

Outcome architecture_order() {
    const auto t0 = Clock::now();
    auto& L = learning();
    const auto& conv = conv_rp_report();
    model::ModelConfig bc;
    bc.architecture = model::Architecture::BagFC;
    auto bag = fit(L.rp, bc, L.vocab_ops, "bagfc/ops-only/register-pressure");
    model::ModelConfig rc;
    rc.architecture = model::Architecture::Recurrent;
    auto rec = fit(L.rp, rc, L.vocab_ops, "recurrent/ops-only/register-pressure");
    const double secs = seconds_since(t0);
    return {conv.rmse <= bag.rmse, "test rmse convstack " + fmt("%.1f", conv.rmse) + " <= bagfc " + fmt("%.1f", bag.rmse) +
                                       " (recurrent " + fmt("%.1f", rec.rmse) + ", not gated), " + fmt("%.0f", secs) +
                                       " s"};
}

Outcome operands_improve() {
    const auto t0 = Clock::now();
    auto& L = learning();
    const auto& ops = conv_rp_report();
    model::ModelConfig oc;
    oc.mode = tok::Mode::OpsAndOperands;
    oc.max_len = tok::default_max_len(oc.mode);
    auto opnd = fit(L.rp, oc, L.vocab_operands, "convstack/ops-and-operands/register-pressure");
    const double secs = seconds_since(t0);
    return {opnd.rmse <= ops.rmse, "test rmse ops-and-operands " + fmt("%.1f", opnd.rmse) + " <= ops-only " +
                                       fmt("%.1f", ops.rmse) + "; exact match " + fmt("%.1f", *opnd.exact_match_pct) +
                                       "% vs " + fmt("%.1f", *ops.exact_match_pct) + "%, " + fmt("%.0f", secs) + " s"};
}

Outcome determinism() {
    const auto t0 = Clock::now();
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "hwcost_acceptance_det";
    fs::remove_all(root);
    auto pipeline = [&](const std::string& tag) {
        const fs::path d = root / tag;
        fs::create_directories(d);
        auto p = [&](const char* name) { return (d / name).string(); };
        std::ostringstream out, err;
        auto ok = [&](std::vector<std::string> args) { return cli::run(args, out, err) == cli::kOk; };
        bool good = ok({"gen-data", "--out", p("d.csv"), "--n", "300", "--seed", "19"}) &&
                    ok({"split", "--data", p("d.csv"), "--train-out", p("tr.csv"), "--val-out", p("va.csv"),
                        "--test-out", p("te.csv"), "--seed", "3"}) &&
                    ok({"build-vocab", "--data", p("tr.csv"), "--out", p("v.txt")}) &&
                    ok({"train", "--data", p("tr.csv"), "--val-data", p("va.csv"), "--vocab", p("v.txt"), "--out",
                        p("m.ckpt"), "--epochs", "3", "--embed-dim", "16", "--conv-channels", "16", "--quiet"}) &&
                    ok({"eval", "--model", p("m.ckpt"), "--data", p("te.csv"), "--report", p("r.txt")});
        if (!good) std::cerr << err.str();
        return good;
    };
    const bool ran = pipeline("a") && pipeline("b");
    bool same = ran;
    std::string files;
    for (const char* f : {"d.csv", "v.txt", "m.ckpt", "r.txt"}) {
        if (!ran) break;
        const bool eq = read_file((root / "a" / f).string()) == read_file((root / "b" / f).string());
        same = same && eq;
        files += std::string(files.empty() ? "" : ", ") + f + (eq ? " identical" : " DIFFER");
    }
    fs::remove_all(root);
    return {same, (ran ? files : std::string("pipeline failed")) + ", " + fmt("%.1f", seconds_since(t0)) + " s"};
}

Outcome tokenizer_properties() {
    const auto t0 = Clock::now();
    auto& L = learning();
    std::size_t rename_bad = 0, oov_bad = 0, order_bad = 0, oov_seen = 0;
    // A deliberately small vocabulary so the corpus exercises OOV handling.
    std::vector<ir::GraphFunction> head(L.functions.begin(), L.functions.begin() + 50);
    const auto small_ops = tok::build_vocab(head, tok::Mode::OpsOnly, 2);
    const auto small_opnd = tok::build_vocab(head, tok::Mode::OpsAndOperands, 2);
    for (std::size_t i = 0; i < L.functions.size(); ++i) {
        const auto& f = L.functions[i];
        const auto renamed = ref::scramble_names(f, i);
        for (auto mode : {tok::Mode::OpsOnly, tok::Mode::OpsAndOperands}) {
            const auto& full = mode == tok::Mode::OpsOnly ? L.vocab_ops : L.vocab_operands;
            if (!(tok::tokenize(f, full, mode) == tok::tokenize(renamed, full, mode))) ++rename_bad;

            const auto& small = mode == tok::Mode::OpsOnly ? small_ops : small_opnd;
            const auto strings = tok::token_strings(f, mode);
            const auto seq = tok::tokenize(f, small, mode);
            if (seq.ids.size() != strings.size() + 2) ++oov_bad;
            for (std::size_t k = 0; k < strings.size() && k + 1 < seq.ids.size(); ++k) {
                const auto id = seq.ids[k + 1];
                const bool known = small.contains(strings[k]);
                if (id < 0 || static_cast<std::size_t>(id) >= small.size()) ++oov_bad;
                else if (known ? small.token(id) != strings[k] : id != tok::kOov) ++oov_bad;
                if (!known) ++oov_seen;
            }
        }
        const auto a = tok::tokenize(f, L.vocab_ops, tok::Mode::OpsOnly);
        const auto b = tok::tokenize(f, L.vocab_operands, tok::Mode::OpsAndOperands);
        if (b.ids.size() < a.ids.size()) ++order_bad;
    }
    const bool pass = rename_bad == 0 && oov_bad == 0 && order_bad == 0 && oov_seen > 0;
    return {pass, std::to_string(L.functions.size()) + " functions: rename mismatches " + std::to_string(rename_bad) +
                      ", OOV violations " + std::to_string(oov_bad) + " (" + std::to_string(oov_seen) +
                      " OOV tokens exercised), length-order violations " + std::to_string(order_bad) + ", " +
                      fmt("%.1f", seconds_since(t0)) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradients},
        {"oracle correctness", oracle_exact},
        {"round trip", round_trip},
        {"learning (scaled-down)", learning_scaled},
        {"architecture ordering", architecture_order},
        {"op+operand improvement", operands_improve},
        {"determinism", determinism},
        {"tokenizer properties", tokenizer_properties},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(n)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << "criterion " << n << " [" << criteria[i].first << "]: " << (o.pass ? "PASS" : "FAIL") << "  "
                  << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
