#include "hwcost/cli.hpp"

#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "hwcost/checkpoint.hpp"
#include "hwcost/dataset.hpp"
#include "hwcost/error.hpp"
#include "hwcost/ir.hpp"
#include "hwcost/oracle.hpp"
#include "hwcost/tokenizer.hpp"
#include "hwcost/training.hpp"
#include "hwcost/util.hpp"

namespace hwcost::cli {

namespace {

std::vector<std::size_t> parse_size_list(const std::string& text, const char* flag) {
    std::vector<std::size_t> out;
    for (const auto& part : split(text, ',')) {
        auto v = parse_int(part);
        if (v <= 0) throw ConfigError(std::string(flag) + ": entries must be positive");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

oracle::MachineConfig machine_from(const std::string& path) {
    return path.empty() ? oracle::MachineConfig{} : oracle::MachineConfig::load(path);
}

ir::GraphFunction read_function(const std::string& path) {
    const auto text = read_file(path);
    try {
        return ir::parse_function(text);
    } catch (const Error& e) {
        throw ValidationError(path + ":" + e.what());
    }
}

// Options shared by train and compare.
struct ModelFlags {
    std::string mode = "ops-only";
    std::size_t max_len = 0;  // 0: per-mode default
    std::size_t embed_dim = 64;
    std::size_t conv_channels = 64;
    std::string kernel_sizes = "2,2,2,2,2,2";
    std::string fc_sizes = "128,64,1";
    std::size_t hidden = 128;
    std::size_t pool_window = 0;
    std::size_t pool_stride = 1;
    std::size_t epochs = 60;
    std::size_t batch_size = 32;
    std::string optimizer = "adam";
    double lr = 1e-3;
    std::uint64_t seed = 1;
    std::size_t patience = 10;
    std::string target = "register-pressure";
    bool quiet = false;

    void attach(CLI::App* app) {
        app->add_option("--mode", mode, "Tokenization mode: ops-only | ops-and-operands")->capture_default_str();
        app->add_option("--max-len", max_len, "Fixed input length (0: 112 ops-only, 256 ops-and-operands)")
            ->capture_default_str();
        app->add_option("--target", target, "register-pressure | xpu-utilization")->capture_default_str();
        app->add_option("--embed-dim", embed_dim, "Embedding width")->capture_default_str();
        app->add_option("--conv-channels", conv_channels, "Output channels of every conv layer")->capture_default_str();
        app->add_option("--kernel-sizes", kernel_sizes, "Comma list, one kernel size per conv layer")
            ->capture_default_str();
        app->add_option("--fc-sizes", fc_sizes, "Comma list of dense widths, ending in 1")->capture_default_str();
        app->add_option("--hidden", hidden, "Recurrent hidden size")->capture_default_str();
        app->add_option("--pool-window", pool_window, "Max-pool window (0: global)")->capture_default_str();
        app->add_option("--pool-stride", pool_stride, "Max-pool stride")->capture_default_str();
        app->add_option("--epochs", epochs, "Maximum epochs")->capture_default_str();
        app->add_option("--batch-size", batch_size, "Mini-batch size")->capture_default_str();
        app->add_option("--optimizer", optimizer, "adam | sgd")->capture_default_str();
        app->add_option("--lr", lr, "Learning rate")->capture_default_str();
        app->add_option("--seed", seed, "Seed for initialization, shuffling and hold-out splits")->capture_default_str();
        app->add_option("--patience", patience, "Early-stopping patience in epochs")->capture_default_str();
        app->add_flag("--quiet", quiet, "Suppress per-epoch progress on stderr");
    }

    tok::Mode tok_mode() const { return tok::mode_from_name(mode); }
    data::TargetKind kind() const { return data::target_kind_from_name(target); }

    model::ModelConfig model_config(model::Architecture arch, std::size_t vocab_size) const {
        model::ModelConfig c;
        c.architecture = arch;
        c.vocab_size = vocab_size;
        c.embed_dim = embed_dim;
        c.mode = tok_mode();
        c.max_len = max_len ? max_len : tok::default_max_len(c.mode);
        c.conv_layers.clear();
        for (auto k : parse_size_list(kernel_sizes, "--kernel-sizes")) c.conv_layers.push_back({conv_channels, k});
        c.fc_sizes = parse_size_list(fc_sizes, "--fc-sizes");
        c.recurrent_hidden = hidden;
        c.pooling = {pool_window, pool_stride};
        c.target_kind = kind();
        c.seed = seed;
        return c;
    }

    train::TrainConfig train_config(std::ostream& err) const {
        train::TrainConfig t;
        t.epochs = epochs;
        t.batch_size = batch_size;
        if (optimizer == "adam")
            t.optimizer = train::OptimizerKind::Adam;
        else if (optimizer == "sgd")
            t.optimizer = train::OptimizerKind::Sgd;
        else
            throw ConfigError("--optimizer must be adam or sgd");
        t.adam.lr = lr;
        t.seed = seed;
        t.early_stop_patience = patience;
        if (!quiet) {
            t.on_epoch = [&err](std::size_t epoch, double tr, double va) {
                err << "epoch " << epoch << "  train_rmse " << tr << "  val_rmse " << va << "\n" << std::flush;
            };
        }
        return t;
    }
};

// Appends `--key=value` for config-file keys not given on the command line.
std::vector<std::string> apply_config_file(std::vector<std::string> args) {
    std::string path;
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config requires a path");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            kept.push_back(args[i]);
        }
    }
    if (path.empty()) return kept;
    auto kv = KeyValueMap::load(path);
    for (const auto& [key, value] : kv.entries()) {
        const std::string flag = "--" + key;
        bool given = false;
        for (const auto& a : kept)
            if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
        if (!given) kept.push_back(flag + "=" + value);
    }
    return kept;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Learned hardware cost models for xpu-dialect dataflow IR", "hwcost"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    // gen-data
    std::string out_path, data_path, machine_path, vocab_path, model_path, report_path;
    std::size_t n = 1000, op_min = 3, op_max = 40;
    std::uint64_t seed = 7;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic CSV corpus labeled by the analytical oracle");
    gen->add_option("--out", out_path, "Output CSV path")->required();
    gen->add_option("--n", n, "Number of functions (each yields one row per target kind)")->capture_default_str();
    gen->add_option("--seed", seed, "Generator seed")->capture_default_str();
    gen->add_option("--op-min", op_min, "Minimum ops per function")->capture_default_str();
    gen->add_option("--op-max", op_max, "Maximum ops per function")->capture_default_str();
    gen->add_option("--machine-config", machine_path, "Machine config (`key = value` lines)");

    // augment
    std::string policy = "rename-only";
    std::size_t factor = 2;
    std::uint64_t aug_seed = 11;
    auto* aug = app.add_subcommand("augment", "Append renamed or reordered variants of every sample");
    aug->add_option("--data", data_path, "Input CSV")->required();
    aug->add_option("--out", out_path, "Output CSV")->required();
    aug->add_option("--policy", policy, "rename-only | reorder-recompute")->capture_default_str();
    aug->add_option("--factor", factor, "Upper bound on output/input size")->capture_default_str();
    aug->add_option("--seed", aug_seed, "Augmentation seed")->capture_default_str();
    aug->add_option("--machine-config", machine_path, "Machine config used to recompute labels");

    // split
    std::string train_out, val_out, test_out, ratios_text = "0.8,0.1,0.1";
    std::uint64_t split_seed = 13;
    auto* spl = app.add_subcommand("split", "Shuffle and partition a CSV into train/val/test");
    spl->add_option("--data", data_path, "Input CSV")->required();
    spl->add_option("--train-out", train_out, "Train CSV")->required();
    spl->add_option("--val-out", val_out, "Validation CSV")->required();
    spl->add_option("--test-out", test_out, "Test CSV")->required();
    spl->add_option("--ratios", ratios_text, "train,val,test fractions summing to 1")->capture_default_str();
    spl->add_option("--seed", split_seed, "Shuffle seed")->capture_default_str();

    // build-vocab
    std::string mode_name = "ops-only";
    std::size_t min_freq = 1;
    auto* bv = app.add_subcommand("build-vocab", "Build a token vocabulary from a CSV corpus");
    bv->add_option("--data", data_path, "Input CSV")->required();
    bv->add_option("--mode", mode_name, "ops-only | ops-and-operands")->capture_default_str();
    bv->add_option("--min-freq", min_freq, "Minimum token frequency")->capture_default_str();
    bv->add_option("--out", out_path, "Vocabulary file")->required();

    // tokenize
    std::string ir_path;
    std::size_t max_len = 0;
    auto* tk = app.add_subcommand("tokenize", "Print the token ids of one IR function");
    tk->add_option("--ir", ir_path, "IR file")->required();
    tk->add_option("--vocab", vocab_path, "Vocabulary file")->required();
    tk->add_option("--mode", mode_name, "ops-only | ops-and-operands")->capture_default_str();
    tk->add_option("--max-len", max_len, "Pad/truncate to this length (0: leave as is)")->capture_default_str();

    // train
    ModelFlags train_flags;
    std::string val_path, history_path, arch = "convstack";
    double val_fraction = 0.1;
    auto* tr = app.add_subcommand("train", "Train a cost model on one target kind");
    tr->add_option("--data", data_path, "Training CSV (rows of other target kinds are ignored)")->required();
    tr->add_option("--val-data", val_path, "Validation CSV (default: hold out --val-fraction of --data)");
    tr->add_option("--val-fraction", val_fraction, "Hold-out fraction when --val-data is absent")->capture_default_str();
    tr->add_option("--vocab", vocab_path, "Vocabulary file")->required();
    tr->add_option("--arch", arch, "bagfc | recurrent | convstack")->capture_default_str();
    tr->add_option("--out", model_path, "Checkpoint path")->required();
    tr->add_option("--history", history_path, "Write per-epoch history here");
    train_flags.attach(tr);

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a CSV and print the report");
    ev->add_option("--model", model_path, "Checkpoint")->required();
    ev->add_option("--data", data_path, "CSV (rows of other target kinds are ignored)")->required();
    ev->add_option("--report", report_path, "Also write the report to this file");

    // compare
    ModelFlags cmp_flags;
    std::string archs = "bagfc,recurrent,convstack";
    auto* cmp = app.add_subcommand("compare", "Train several architectures on identical splits and rank them");
    cmp->add_option("--data", data_path, "CSV corpus")->required();
    cmp->add_option("--vocab", vocab_path, "Vocabulary file")->required();
    cmp->add_option("--archs", archs, "Comma list of architectures")->capture_default_str();
    cmp->add_option("--ratios", ratios_text, "train,val,test fractions")->capture_default_str();
    cmp->add_option("--split-seed", split_seed, "Split seed")->capture_default_str();
    cmp->add_option("--report", report_path, "Also write the table to this file");
    cmp_flags.attach(cmp);

    // predict
    std::vector<std::string> ir_paths;
    std::string ir_list;
    auto* pr = app.add_subcommand("predict", "Predict the target for IR files; one number per function on stdout");
    pr->add_option("--model", model_path, "Checkpoint")->required();
    pr->add_option("--ir", ir_paths, "IR file (repeatable)");
    pr->add_option("--ir-list", ir_list, "File with one IR path per line");

    // oracle
    auto* orc = app.add_subcommand("oracle", "Print register pressure and vector-ALU utilization of an IR file");
    orc->add_option("--ir", ir_path, "IR file")->required();
    orc->add_option("--machine-config", machine_path, "Machine config (`key = value` lines)");

    try {
        auto args = apply_config_file(raw_args);
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.category() == ErrorCategory::Usage ? kUsage : kDataError;
    }

    try {
        if (*gen) {
            data::GeneratorConfig g;
            g.num_samples = n;
            g.seed = seed;
            g.op_count_min = op_min;
            g.op_count_max = op_max;
            auto samples = data::generate(g, machine_from(machine_path));
            data::write_csv(samples, out_path);
            err << "wrote " << samples.size() << " samples to " << out_path << "\n";
        } else if (*aug) {
            auto samples = data::load_csv(data_path);
            auto result = data::augment(samples, data::augment_policy_from_name(policy), factor,
                                        machine_from(machine_path), aug_seed);
            data::write_csv(result, out_path);
            err << "wrote " << result.size() << " samples to " << out_path << "\n";
        } else if (*spl) {
            auto parts = split(ratios_text, ',');
            if (parts.size() != 3) throw ConfigError("--ratios needs three comma-separated fractions");
            auto samples = data::load_csv(data_path);
            auto s = data::split(samples, {parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2])},
                                 split_seed);
            data::write_csv(s.train, train_out);
            data::write_csv(s.val, val_out);
            data::write_csv(s.test, test_out);
            err << "split " << samples.size() << " samples into " << s.train.size() << "/" << s.val.size() << "/"
                << s.test.size() << "\n";
        } else if (*bv) {
            auto samples = data::load_csv(data_path);
            std::vector<ir::GraphFunction> corpus;
            std::set<std::string> seen;
            for (const auto& s : samples)
                if (seen.insert(s.ir_text).second) corpus.push_back(ir::parse_function(s.ir_text));
            auto vocab = tok::build_vocab(corpus, tok::mode_from_name(mode_name), min_freq);
            vocab.save(out_path);
            err << "vocabulary of " << vocab.size() << " tokens from " << corpus.size() << " functions\n";
        } else if (*tk) {
            auto vocab = tok::Vocabulary::load(vocab_path);
            auto seq = tok::tokenize(read_function(ir_path), vocab, tok::mode_from_name(mode_name));
            if (max_len) seq = tok::pad_or_truncate(seq, max_len);
            for (std::size_t i = 0; i < seq.ids.size(); ++i) out << (i ? " " : "") << seq.ids[i];
            out << "\n";
        } else if (*tr) {
            auto vocab = tok::Vocabulary::load(vocab_path);
            const auto kind = train_flags.kind();
            auto samples = data::filter_kind(data::load_csv(data_path), kind);
            std::vector<data::Sample> train_set, val_set;
            if (!val_path.empty()) {
                train_set = std::move(samples);
                val_set = data::filter_kind(data::load_csv(val_path), kind);
            } else {
                if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("--val-fraction must be in (0, 1)");
                auto s = data::split(samples, {1.0 - val_fraction, val_fraction / 2, val_fraction / 2}, train_flags.seed);
                train_set = std::move(s.train);
                val_set = std::move(s.val);
                val_set.insert(val_set.end(), s.test.begin(), s.test.end());
            }
            auto config = train_flags.model_config(model::architecture_from_name(arch), vocab.size());
            auto result = train::train(model::Model(config), train_set, val_set, train_flags.train_config(err), vocab);
            ckpt::save({result.model, vocab, result.optimizer}, model_path);
            if (!history_path.empty()) write_file(history_path, train::history_to_text(result.history));
            err << "best epoch " << result.best_epoch << " val_rmse " << result.best_val_rmse << "; saved "
                << model_path << "\n";
        } else if (*ev) {
            auto c = ckpt::load(model_path);
            auto samples = data::filter_kind(data::load_csv(data_path), c.model.config().target_kind);
            auto report = train::evaluate(c.model, samples, c.vocab).to_text();
            out << report;
            if (!report_path.empty()) write_file(report_path, report);
        } else if (*cmp) {
            auto vocab = tok::Vocabulary::load(vocab_path);
            auto parts = split(ratios_text, ',');
            if (parts.size() != 3) throw ConfigError("--ratios needs three comma-separated fractions");
            auto samples = data::filter_kind(data::load_csv(data_path), cmp_flags.kind());
            auto s = data::split(samples, {parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2])},
                                 split_seed);
            std::vector<model::ModelConfig> configs;
            for (const auto& a : split(archs, ','))
                configs.push_back(cmp_flags.model_config(model::architecture_from_name(a), vocab.size()));
            auto rows = train::compare_architectures(s, configs, cmp_flags.train_config(err), vocab, true);
            auto table = train::comparison_table(rows);
            out << table;
            if (!report_path.empty()) write_file(report_path, table);
        } else if (*pr) {
            if (!ir_list.empty()) {
                for (const auto& line : split(read_file(ir_list), '\n'))
                    if (!line.empty()) ir_paths.push_back(line);
            }
            if (ir_paths.empty()) throw ConfigError("predict needs --ir or --ir-list");
            auto c = ckpt::load(model_path);
            const auto& mc = c.model.config();
            std::vector<tok::TokenSequence> seqs;
            for (const auto& p : ir_paths)
                seqs.push_back(tok::pad_or_truncate(tok::tokenize(read_function(p), c.vocab, mc.mode), mc.max_len));
            std::ostringstream buf;
            for (const auto& s : seqs) buf << format_double(model::predict(c.model, s)) << "\n";
            out << buf.str();
        } else if (*orc) {
            auto f = read_function(ir_path);
            auto report = oracle::evaluate(f, machine_from(machine_path));
            out << report.register_pressure << "\n" << format_double(report.xpu_utilization.value()) << "\n";
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.category() == ErrorCategory::Usage ? kUsage : kDataError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kOk;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace hwcost::cli
