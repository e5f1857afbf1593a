// hardproj command-line driver: generate | train | eval | sweep.
//
// Every subcommand accepts --config FILE (flat key=value lines, '#' comments;
// keys are the long flag names with '-' or '_') and --show-config, which
// prints the resolved settings in that same format and exits. Flags given on
// the command line win over the file.
//
// Exit codes: 0 ok, 1 usage/config, 2 numerical failure, 3 I/O.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hardproj/hardproj.hpp"

namespace fs = std::filesystem;
using namespace hardproj;

namespace {

enum Exit { ok = 0, usage = 1, numerical = 2, io = 3 };

void note(const std::string& msg) { std::cerr << "hardproj: " << msg << '\n'; }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Fills options of `cmd` that were not given on the command line from a
/// key=value file.
void apply_config_file(CLI::App& cmd, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        std::replace(key.begin(), key.end(), '_', '-');
        if (key == "config" || key == "show-config")
            throw ConfigError(path + ":" + std::to_string(lineno) + ": '" + key + "' is not allowed in a config file");
        CLI::Option* opt = cmd.get_option_no_throw("--" + key);
        if (!opt) throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (opt->count() > 0) continue;
        if (opt->get_type_size() == 0) {  // flag
            if (value == "true" || value == "1") {
                opt->add_result("true");
            } else if (value != "false" && value != "0") {
                throw ConfigError(path + ":" + std::to_string(lineno) + ": flag '" + key + "' expects true/false");
            } else {
                continue;
            }
        } else {
            opt->add_result(value);
        }
        opt->run_callback();
    }
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::ostringstream s;
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
}

std::string join_reals(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_real(v[i]);
    return s;
}

/// Options shared by train and sweep, bound to a TrainConfig.
struct TrainFlags {
    std::string variant = "picard";
    std::string grad_mode = "frozen";
    std::string train_path = "data/train.csv";
    std::string stats_path;  // empty: statistics of the loaded training rows
    bool paper_scale = false;
    bool no_normalize = false;
    TrainConfig cfg;

    void add(CLI::App& cmd, bool with_variant) {
        if (with_variant) cmd.add_option("--variant", variant, "mlp, kkt or picard");
        cmd.add_option("--train-data", train_path, "training CSV written by 'generate'");
        cmd.add_option("--stats", stats_path, "normalization stats CSV (default: computed from the training data)");
        cmd.add_option("--hidden", cfg.hidden, "hidden layer widths, comma separated")->delimiter(',');
        cmd.add_option("--epochs", cfg.epochs);
        cmd.add_option("--lr", cfg.lr, "Adam learning rate");
        cmd.add_option("--batch-size", cfg.batch_size);
        cmd.add_option("--seed", cfg.seed);
        cmd.add_option("--train-fraction", cfg.train_fraction, "seeded uniform subset of the training rows");
        cmd.add_flag("--no-normalize", no_normalize, "train on raw (unnormalized) columns");
        cmd.add_option("--grad-mode", grad_mode, "frozen or exact");
        cmd.add_option("--constraint", cfg.constraint, "constraint set: reactor-v1 or none");
        cmd.add_flag("--paper-scale", paper_scale, "50k epochs, lr 1e-5, batch 2000, one hidden layer of 64");
    }

    /// Applies the paper-scale profile to settings that were not set explicitly.
    void resolve(const CLI::App& cmd) {
        if (paper_scale) {
            const TrainConfig p = TrainConfig::paper_scale();
            if (!cmd.count("--epochs")) cfg.epochs = p.epochs;
            if (!cmd.count("--lr")) cfg.lr = p.lr;
            if (!cmd.count("--batch-size")) cfg.batch_size = p.batch_size;
            if (!cmd.count("--hidden")) cfg.hidden = p.hidden;
        }
        cfg.variant = parse_variant(variant);
        cfg.grad_mode = parse_grad_mode(grad_mode);
        cfg.normalize = !no_normalize;
        cfg.validate();
    }

    /// Training table with the normalization statistics attached.
    Dataset load() const {
        Dataset d = read_csv(train_path);
        if (d.rows() == 0) throw IoError(train_path + ": no data rows");
        std::vector<std::string> names = d.input_names;
        names.insert(names.end(), d.output_names.begin(), d.output_names.end());
        if (stats_path.empty()) {
            d.stats = compute_stats(d.x, d.y, names);
        } else {
            d.stats = read_stats(stats_path);
            if (d.stats.columns != names) throw IoError(stats_path + ": columns do not match " + train_path);
        }
        return d;
    }

    std::string show(bool with_variant) const {
        std::ostringstream s;
        if (with_variant) s << "variant=" << variant << '\n';
        s << "train_data=" << train_path << '\n'
          << "stats=" << stats_path << '\n'
          << "hidden=" << join(cfg.hidden) << '\n'
          << "epochs=" << cfg.epochs << '\n'
          << "lr=" << format_real(cfg.lr) << '\n'
          << "batch_size=" << cfg.batch_size << '\n'
          << "seed=" << cfg.seed << '\n'
          << "train_fraction=" << format_real(cfg.train_fraction) << '\n'
          << "no_normalize=" << (no_normalize ? "true" : "false") << '\n'
          << "grad_mode=" << grad_mode << '\n'
          << "constraint=" << cfg.constraint << '\n';
        return s.str();
    }
};

void ensure_parent(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (parent.empty()) return;
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural surrogates with exact linear and separable nonlinear constraints"};
    app.require_subcommand(1);
    std::string config_path;
    bool show_config = false;
    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "flat key=value settings file");
        cmd->add_flag("--show-config", show_config, "print resolved settings and exit");
    };

    // generate
    auto* gen = app.add_subcommand("generate", "write train/test CSVs and a stats sidecar");
    std::size_t n_train = 4000, n_test = 500;
    std::uint64_t gen_seed = 42;
    std::string gen_out = "data";
    bool gen_paper = false;
    common(gen);
    gen->add_option("--train", n_train, "training rows");
    gen->add_option("--test", n_test, "test rows");
    gen->add_option("--seed", gen_seed);
    gen->add_option("--out", gen_out, "output directory");
    gen->add_flag("--paper-scale", gen_paper, "20000 training rows unless --train is given");

    // train
    auto* tr = app.add_subcommand("train", "train one model variant and write a checkpoint");
    TrainFlags tflags;
    std::string ckpt_out = "model.ckpt", loss_log;
    std::size_t log_every = 100;
    common(tr);
    tflags.add(*tr, true);
    tr->add_option("--out", ckpt_out, "checkpoint path");
    tr->add_option("--loss-log", loss_log, "per-epoch CSV (default: <out>.loss.csv)");
    tr->add_option("--log-every", log_every, "progress line on stderr every N epochs (0: off)");

    // eval
    auto* ev = app.add_subcommand("eval", "score checkpoints on a dataset");
    std::vector<std::string> ckpts;
    std::string eval_data = "data/test.csv", report_out = "report";
    bool truth = false;
    common(ev);
    ev->add_option("--checkpoint", ckpts, "one or more checkpoints")->delimiter(',');
    ev->add_option("--data", eval_data, "dataset CSV");
    ev->add_option("--out", report_out, "report prefix; writes <prefix>.txt and <prefix>.csv");
    ev->add_flag("--ground-truth", truth, "also score the dataset's own outputs as a reference column");

    // sweep
    auto* sw = app.add_subcommand("sweep", "data-scarcity sweep over training fractions");
    TrainFlags sflags;
    SweepConfig scfg;
    std::vector<std::string> sweep_variants{"mlp", "kkt", "picard"};
    std::string sweep_test = "data/test.csv", sweep_out = "sweep.csv";
    common(sw);
    sflags.add(*sw, false);
    sw->add_option("--fractions", scfg.fractions, "training fractions in (0, 1]")->delimiter(',');
    sw->add_option("--variants", sweep_variants)->delimiter(',');
    sw->add_option("--seeds", scfg.seeds, "one run per seed")->delimiter(',');
    sw->add_option("--test-data", sweep_test);
    sw->add_option("--out", sweep_out, "R² vs fraction CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? Exit::ok : Exit::usage;
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        if (!config_path.empty()) apply_config_file(*cmd, config_path);

        if (cmd == gen) {
            if (gen_paper && !gen->count("--train")) n_train = 20000;
            if (show_config) {
                std::cout << "train=" << n_train << "\ntest=" << n_test << "\nseed=" << gen_seed << "\nout=" << gen_out
                          << '\n';
                return Exit::ok;
            }
            const auto th = reactor::default_thermo();
            const auto g = reactor::generate_dataset(th, n_train, n_test, reactor::default_bounds(), gen_seed);
            const fs::path dir(gen_out);
            ensure_parent((dir / "train.csv").string());
            write_csv(g.train, (dir / "train.csv").string());
            write_csv(g.test, (dir / "test.csv").string());
            write_stats(g.train.stats, g.train, (dir / "stats.csv").string());
            note("wrote " + std::to_string(n_train) + " train / " + std::to_string(n_test) + " test rows to " +
                dir.string() + " (" + std::to_string(g.clipped) + " samples hit the hydrogen limit)");
            return Exit::ok;
        }

        if (cmd == tr) {
            tflags.resolve(*tr);
            if (loss_log.empty()) loss_log = ckpt_out + ".loss.csv";
            if (show_config) {
                std::cout << tflags.show(true) << "out=" << ckpt_out << "\nloss_log=" << loss_log
                          << "\nlog_every=" << log_every << '\n';
                return Exit::ok;
            }
            const Dataset data = tflags.load();
            note("training " + tflags.variant + " on " + tflags.train_path + " (" + std::to_string(data.rows()) +
                " rows, fraction " + format_real(tflags.cfg.train_fraction) + ")");
            std::ostringstream csv;
            csv << "epoch,loss,max_rce_percent,seconds\n";
            const auto result = train(tflags.cfg, data, [&](const EpochLog& e) {
                csv << e.epoch << ',' << format_real(e.loss) << ',' << format_real(e.max_rce) << ','
                    << format_real(e.seconds) << '\n';
                if (log_every && (e.epoch % log_every == 0 || e.epoch == tflags.cfg.epochs)) {
                    char buf[160];
                    std::snprintf(buf, sizeof buf, "epoch %zu  loss %.6e  max RCE %.3e %%", e.epoch, e.loss,
                                  e.max_rce);
                    note(buf);
                }
            });
            ensure_parent(ckpt_out);
            save_checkpoint(result.model, ckpt_out);
            write_text(loss_log, csv.str());
            note("wrote " + ckpt_out + " and " + loss_log);
            return Exit::ok;
        }

        if (cmd == ev) {
            if (show_config) {
                std::cout << "checkpoint=" << join(ckpts) << "\ndata=" << eval_data << "\nout=" << report_out
                          << "\nground_truth=" << (truth ? "true" : "false") << '\n';
                return Exit::ok;
            }
            if (ckpts.empty() && !truth) throw UsageError("eval needs --checkpoint or --ground-truth");
            const Dataset data = read_csv(eval_data);
            const auto spec = resolve_constraints(reactor::constraint_id).separable;
            const std::string tag = fs::path(eval_data).filename().string() + " (" + data.generator +
                                    " seed=" + std::to_string(data.seed) + ")";
            std::vector<metrics::EvalReport> reports;
            if (truth) reports.push_back(metrics::evaluate(*spec, data.x, data.y, data.y, "truth", tag, data.output_names));
            for (const auto& path : ckpts) {
                const Model m = load_checkpoint(path);
                if (m.params().in_dim() != data.x.cols() || m.params().out_dim() != data.y.cols())
                    throw UsageError("checkpoint " + path + " does not match the dataset's column counts");
                std::string name = to_string(m.variant());
                for (const auto& r : reports)
                    if (r.model_tag == name) name += "#" + std::to_string(reports.size());
                reports.push_back(metrics::evaluate(*spec, data.x, data.y, m.predict(data.x), name, tag, data.output_names));
            }
            const std::string table = metrics::format_table(reports);
            write_text(report_out + ".txt", table);
            write_text(report_out + ".csv", metrics::format_csv(reports));
            std::cerr << table;
            note("wrote " + report_out + ".txt and " + report_out + ".csv");
            return Exit::ok;
        }

        if (cmd == sw) {
            sflags.resolve(*sw);
            scfg.base = sflags.cfg;
            scfg.variants.clear();
            for (const auto& v : sweep_variants) scfg.variants.push_back(parse_variant(v));
            if (!sw->count("--seeds") && sw->count("--seed")) scfg.seeds = {sflags.cfg.seed};
            if (show_config) {
                std::cout << sflags.show(false) << "fractions=" << join_reals(scfg.fractions)
                          << "\nvariants=" << join(sweep_variants) << "\nseeds=" << join(scfg.seeds)
                          << "\ntest_data=" << sweep_test << "\nout=" << sweep_out << '\n';
                return Exit::ok;
            }
            const Dataset train_set = sflags.load();
            const Dataset test_set = read_csv(sweep_test);
            const auto rows = run_sweep(
                scfg, train_set, test_set,
                [](const SweepRow& r) {
                    char buf[160];
                    std::snprintf(buf, sizeof buf, "%-6s fraction %-5g seed %-4llu rows %-6zu R2 %.4f", to_string(r.variant),
                                  r.fraction, static_cast<unsigned long long>(r.seed), r.rows, r.r2_mean);
                    note(buf);
                },
                note);
            write_text(sweep_out, format_sweep_csv(rows, reactor::balance_labels()));
            note("wrote " + sweep_out);
            return Exit::ok;
        }
    } catch (const UsageError& e) {
        note(std::string("usage error: ") + e.what());
        return Exit::usage;
    } catch (const ConfigError& e) {
        note(std::string("configuration error: ") + e.what());
        return Exit::usage;
    } catch (const ShapeError& e) {
        note(std::string("shape error: ") + e.what());
        return Exit::usage;
    } catch (const NumericalError& e) {
        note(std::string("numerical failure: ") + e.what());
        return Exit::numerical;
    } catch (const IoError& e) {
        note(std::string("I/O error: ") + e.what());
        return Exit::io;
    } catch (const std::exception& e) {
        note(std::string("error: ") + e.what());
        return Exit::usage;
    }
    return Exit::usage;
}
