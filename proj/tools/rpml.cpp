// rpml: cluster -> triplets -> train -> embed -> eval pipeline over feature
// files. Results go to stdout, line-delimited progress logs to stderr.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "rpml/rpml.hpp"

namespace {

constexpr std::uint64_t kKmeansStream = 4;

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

rpml::Matrix load_features_flag(const std::string& path, const std::string& format) {
    if (format == "csv")
        return rpml::load_features(path, rpml::FileFormat::Csv);
    if (format == "bin")
        return rpml::load_features(path, rpml::FileFormat::Binary);
    return rpml::load_features(path);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// Flat key = value TOML: comments, quoted strings and [..] arrays.
std::vector<std::pair<std::string, std::string>> parse_flat_toml(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw rpml::DataError("cannot open config " + path);
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"')
                quoted = !quoted;
            else if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[')
            throw rpml::UsageError(path + ": sections are not supported (line " +
                                   std::to_string(line_no) + ")");
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw rpml::UsageError(path + ": expected key = value at line " +
                                   std::to_string(line_no));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        } else if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
            value = value.substr(1, value.size() - 2);
            std::string packed;
            for (char c : value)
                if (c != ' ' && c != '\t')
                    packed += c;
            value = packed;
        }
        if (key.empty() || value.empty())
            throw rpml::UsageError(path + ": empty key or value at line " +
                                   std::to_string(line_no));
        entries.emplace_back(std::move(key), std::move(value));
    }
    return entries;
}

// Applies a config file to the raw token list: every key becomes the
// same-named flag unless that flag was given on the command line, which
// wins. Unknown keys are rejected by name.
void apply_config(const CLI::App& sub, const std::string& config_path,
                  std::vector<std::string>& tokens) {
    auto has_flag = [&tokens](const std::string& name) {
        const std::string exact = "--" + name;
        const std::string prefix = exact + "=";
        for (const auto& t : tokens)
            if (t == exact || t.rfind(prefix, 0) == 0)
                return true;
        return false;
    };
    for (const auto& [key, value] : parse_flat_toml(config_path)) {
        const CLI::Option* opt = sub.get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config")
            throw rpml::UsageError(config_path + ": unknown key '" + key + "'");
        if (has_flag(key))
            continue; // command-line flag wins
        if (opt->get_expected_min() == 0) { // boolean flag
            if (value == "true")
                tokens.push_back("--" + key);
            else if (value != "false")
                throw rpml::UsageError(config_path + ": key '" + key +
                                       "' expects true or false");
        } else {
            tokens.push_back("--" + key);
            tokens.push_back(value);
        }
    }
}

// Extracts "--config <path>" / "--config=<path>" from the token list.
std::string take_config_token(std::vector<std::string>& tokens) {
    std::string path;
    for (std::size_t i = 0; i < tokens.size();) {
        if (tokens[i] == "--config" && i + 1 < tokens.size()) {
            path = tokens[i + 1];
            tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                         tokens.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        } else if (tokens[i].rfind("--config=", 0) == 0) {
            path = tokens[i].substr(9);
            tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            ++i;
        }
    }
    return path;
}

void fail_all(const std::vector<std::string>& problems) {
    if (problems.empty())
        return;
    std::string msg = "invalid flags:";
    for (const auto& p : problems)
        msg += "\n  " + p;
    throw rpml::UsageError(msg);
}

struct ClusterFlags {
    std::string features;
    std::string format = "auto";
    std::string out;
    rpml::ClusterConfig cfg;

    void add_options(CLI::App* sub, bool require_out) {
        sub->add_option("--features", features, "feature matrix file")->required();
        sub->add_option("--format", format, "features format: auto|csv|bin")
            ->check(CLI::IsMember({"auto", "csv", "bin"}));
        if (require_out)
            sub->add_option("--out", out, "output labels file")->required();
        sub->add_option("--k", cfg.k, "neighbor count");
        sub->add_option("--gamma", cfg.gamma, "relevancy scale");
        sub->add_option("--epsilon", cfg.epsilon, "relevancy threshold");
        sub->add_option("--damping", cfg.damping, "random-walk teleport factor");
        sub->add_option("--tol", cfg.tol, "stationary distribution tolerance");
        sub->add_option("--max_power_iters", cfg.max_power_iters, "power iteration cap");
        sub->add_option("--threads", cfg.threads, "worker thread cap");
    }

    void validate(std::vector<std::string>& problems) const {
        if (cfg.k < 1)
            problems.push_back("--k must be >= 1");
        if (cfg.gamma <= 0.0)
            problems.push_back("--gamma must be > 0");
        if (cfg.epsilon <= 0.0)
            problems.push_back("--epsilon must be > 0");
        if (cfg.damping < 0.0 || cfg.damping >= 1.0)
            problems.push_back("--damping must be in [0, 1)");
        if (cfg.tol <= 0.0)
            problems.push_back("--tol must be > 0");
        if (cfg.max_power_iters < 1)
            problems.push_back("--max_power_iters must be >= 1");
        if (cfg.threads < 1)
            problems.push_back("--threads must be >= 1");
    }
};

struct TrainFlags {
    rpml::TrainConfig cfg;
    std::string variant = "rpml";
    std::string mode = "full_batch_cg";

    void add_options(CLI::App* sub) {
        sub->add_option("--l", cfg.l, "embedding dimension");
        sub->add_option("--alpha", cfg.alpha_deg, "angular bound in degrees");
        sub->add_option("--variant", variant, "loss variant: rpml|rpml_v1")
            ->check(CLI::IsMember({"rpml", "rpml_v1"}));
        sub->add_option("--maxiter", cfg.maxiter, "CG iteration cap");
        sub->add_option("--grad_tol", cfg.grad_tol, "CG gradient tolerance");
        sub->add_option("--mode", mode, "training mode: full_batch_cg|stochastic")
            ->check(CLI::IsMember({"full_batch_cg", "stochastic"}));
        sub->add_option("--batch_size", cfg.batch_size, "mini-batch size");
        sub->add_option("--eta", cfg.eta, "stochastic step size");
        sub->add_option("--epochs", cfg.epochs, "stochastic epochs");
        sub->add_option("--seed", cfg.seed, "random seed");
        sub->add_flag("--freeze_weights", cfg.freeze_weights, "do not update the weight parameter");
        sub->add_option("--per_anchor", cfg.per_anchor, "triplets per anchor");
        sub->add_option("--v1_dim", cfg.v1_dim, "rpml_v1 projection width (0 = use --l)");
    }

    void validate(std::vector<std::string>& problems) const {
        if (cfg.l < 1)
            problems.push_back("--l must be >= 1");
        if (cfg.alpha_deg <= 0.0 || cfg.alpha_deg >= 90.0)
            problems.push_back("--alpha must be in (0, 90)");
        if (cfg.maxiter < 0)
            problems.push_back("--maxiter must be >= 0");
        if (cfg.grad_tol <= 0.0)
            problems.push_back("--grad_tol must be > 0");
        if (cfg.batch_size < 1)
            problems.push_back("--batch_size must be >= 1");
        if (cfg.eta <= 0.0)
            problems.push_back("--eta must be > 0");
        if (cfg.epochs < 0)
            problems.push_back("--epochs must be >= 0");
        if (cfg.per_anchor < 1)
            problems.push_back("--per_anchor must be >= 1");
        if (cfg.v1_dim < 0)
            problems.push_back("--v1_dim must be >= 0");
    }

    rpml::TrainConfig resolved() const {
        rpml::TrainConfig c = cfg;
        c.variant = rpml::variant_from_string(variant);
        c.mode = rpml::train_mode_from_string(mode);
        return c;
    }
};

void write_trace(const rpml::TrainReport& report, std::ostream& os) {
    for (std::size_t i = 0; i < report.cost_trace.size(); ++i) {
        os << "{\"iter\": " << i << ", \"cost\": " << fmt17(report.cost_trace[i])
           << ", \"grad_norm\": " << fmt17(report.grad_norm_trace[i]) << ", \"mean_weight\": "
           << fmt17(report.mean_weight_trace[i]) << "}\n";
    }
}

void print_cluster_summary(const rpml::ClusterAssignment& assignment, std::ostream& os) {
    std::vector<int> sizes(static_cast<std::size_t>(assignment.cluster_count), 0);
    for (int label : assignment.labels)
        ++sizes[static_cast<std::size_t>(label)];
    os << "clusters\t" << assignment.cluster_count << "\n";
    os << "sizes\t";
    for (std::size_t i = 0; i < sizes.size(); ++i)
        os << (i ? "," : "") << sizes[i];
    os << "\n";
}

void print_metrics(const rpml::EvalResult& r, std::ostream& os) {
    os << "NMI\tF\tP\tR";
    for (const auto& [k, v] : r.recall_at_k)
        os << "\tR@" << k;
    os << "\n";
    os << fmt6(r.nmi) << '\t' << fmt6(r.f_measure) << '\t' << fmt6(r.precision) << '\t'
       << fmt6(r.recall);
    for (const auto& [k, v] : r.recall_at_k)
        os << '\t' << fmt6(v);
    os << "\n";
}

rpml::Labels self_cluster(const rpml::Matrix& X, const ClusterFlags& flags) {
    const rpml::ClusterAssignment assignment = rpml::cluster(X, flags.cfg);
    std::cerr << "clustered " << X.rows() << " examples into " << assignment.cluster_count
              << " pseudo-clusters\n";
    return assignment.labels;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"unsupervised orthonormal embedding learning toolkit"};
    app.require_subcommand(1);

    // Config files are handled before CLI11 parsing (see apply_config);
    // this option only documents the flag.
    std::string config_path_doc;
    auto add_config_option = [&config_path_doc](CLI::App* sub) {
        sub->add_option("--config", config_path_doc,
                        "TOML config file; flags override config values");
    };

    // cluster
    auto* cluster_cmd = app.add_subcommand("cluster", "pseudo-label features with AAS clustering");
    add_config_option(cluster_cmd);
    ClusterFlags cluster_flags;
    cluster_flags.add_options(cluster_cmd, /*require_out=*/true);

    // triplets
    auto* triplets_cmd = app.add_subcommand("triplets", "sample triplets from a labels file");
    add_config_option(triplets_cmd);
    struct {
        std::string labels, out;
        int per_anchor = 5;
        std::uint64_t seed = 0;
    } triplet_flags;
    triplets_cmd->add_option("--labels", triplet_flags.labels, "labels file")->required();
    triplets_cmd->add_option("--out", triplet_flags.out, "output CSV of (a,p,n) indices")
        ->required();
    triplets_cmd->add_option("--per_anchor", triplet_flags.per_anchor, "triplets per anchor");
    triplets_cmd->add_option("--seed", triplet_flags.seed, "random seed");

    // train
    auto* train_cmd = app.add_subcommand("train", "learn an embedding from pseudo-labels");
    add_config_option(train_cmd);
    ClusterFlags train_cluster_flags;
    train_cluster_flags.add_options(train_cmd, /*require_out=*/false);
    TrainFlags train_flags;
    train_flags.add_options(train_cmd);
    std::string train_labels_path, train_out, train_trace, train_checkpoint;
    bool train_self_cluster = false;
    train_cmd->add_option("--labels", train_labels_path, "pseudo-label file");
    train_cmd->add_flag("--self-cluster", train_self_cluster,
                        "run AAS clustering instead of reading --labels");
    train_cmd->add_option("--out", train_out, "output embedding file")->required();
    train_cmd->add_option("--trace", train_trace, "write the JSON-lines trace here too");
    train_cmd->add_option("--checkpoint", train_checkpoint, "checkpoint file prefix");

    // embed
    auto* embed_cmd = app.add_subcommand("embed", "project features with a learned embedding");
    add_config_option(embed_cmd);
    struct {
        std::string features, format = "auto", embedding, out;
    } embed_flags;
    embed_cmd->add_option("--features", embed_flags.features, "feature matrix file")->required();
    embed_cmd->add_option("--format", embed_flags.format, "features format: auto|csv|bin")
        ->check(CLI::IsMember({"auto", "csv", "bin"}));
    embed_cmd->add_option("--embedding", embed_flags.embedding, "embedding file")->required();
    embed_cmd->add_option("--out", embed_flags.out, "output file (.csv or binary)")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "clustering and retrieval metrics");
    add_config_option(eval_cmd);
    struct {
        std::string features, format = "auto", labels;
        std::vector<int> ks{1, 2, 4, 8};
        std::uint64_t seed = 0;
        int restarts = 10;
        int threads = 1;
    } eval_flags;
    eval_cmd->add_option("--features", eval_flags.features, "feature matrix file (embedded or raw)")
        ->required();
    eval_cmd->add_option("--format", eval_flags.format, "features format: auto|csv|bin")
        ->check(CLI::IsMember({"auto", "csv", "bin"}));
    eval_cmd->add_option("--labels", eval_flags.labels, "ground-truth labels file")->required();
    eval_cmd->add_option("--ks", eval_flags.ks, "recall cutoffs")->delimiter(',');
    eval_cmd->add_option("--seed", eval_flags.seed, "k-means seed");
    eval_cmd->add_option("--restarts", eval_flags.restarts, "k-means restarts");
    eval_cmd->add_option("--threads", eval_flags.threads, "worker thread cap");

    // pipeline
    auto* pipe_cmd = app.add_subcommand("pipeline", "cluster, train, embed and evaluate");
    add_config_option(pipe_cmd);
    ClusterFlags pipe_cluster_flags;
    pipe_cluster_flags.add_options(pipe_cmd, /*require_out=*/false);
    TrainFlags pipe_train_flags;
    pipe_train_flags.add_options(pipe_cmd);
    struct {
        std::string labels, test_features, test_labels;
        std::string out_labels, out_embedding, trace;
        std::vector<int> ks{1, 2, 4, 8};
        int restarts = 10;
    } pipe_flags;
    pipe_cmd->add_option("--labels", pipe_flags.labels,
                         "ground-truth labels for evaluating on the training features");
    pipe_cmd->add_option("--test-features", pipe_flags.test_features,
                         "held-out features to evaluate instead of the training set");
    pipe_cmd->add_option("--test-labels", pipe_flags.test_labels,
                         "ground-truth labels of the held-out features");
    pipe_cmd->add_option("--out-labels", pipe_flags.out_labels, "write pseudo-labels here");
    pipe_cmd->add_option("--out-embedding", pipe_flags.out_embedding, "write the embedding here");
    pipe_cmd->add_option("--trace", pipe_flags.trace, "write the JSON-lines trace here too");
    pipe_cmd->add_option("--ks", pipe_flags.ks, "recall cutoffs")->delimiter(',');
    pipe_cmd->add_option("--restarts", pipe_flags.restarts, "k-means restarts");

    try {
        std::vector<std::string> tokens(argv + 1, argv + argc);
        const std::string config_path = take_config_token(tokens);
        if (!config_path.empty()) {
            const CLI::App* target = nullptr;
            for (const auto& t : tokens) {
                if (!t.empty() && t.front() != '-') {
                    target = app.get_subcommand_no_throw(t);
                    break;
                }
            }
            if (target == nullptr)
                throw rpml::UsageError("--config requires a subcommand");
            apply_config(*target, config_path, tokens);
        }
        std::reverse(tokens.begin(), tokens.end());
        app.parse(tokens);

        if (cluster_cmd->parsed()) {
            std::vector<std::string> problems;
            cluster_flags.validate(problems);
            fail_all(problems);
            const rpml::Matrix X = load_features_flag(cluster_flags.features, cluster_flags.format);
            if (X.rows() < 2)
                throw rpml::DataError("need at least 2 examples");
            const rpml::ClusterAssignment assignment = rpml::cluster(X, cluster_flags.cfg);
            rpml::save_labels(assignment.labels, cluster_flags.out);
            print_cluster_summary(assignment, std::cout);
        } else if (triplets_cmd->parsed()) {
            std::vector<std::string> problems;
            if (triplet_flags.per_anchor < 1)
                problems.push_back("--per_anchor must be >= 1");
            fail_all(problems);
            const rpml::Labels labels = rpml::load_labels(triplet_flags.labels);
            const rpml::TripletSet set = rpml::generate_triplets(
                labels, triplet_flags.per_anchor, triplet_flags.seed);
            std::ofstream out(triplet_flags.out);
            if (!out)
                throw rpml::DataError("cannot write " + triplet_flags.out);
            for (const auto& t : set.items)
                out << t.a << ',' << t.p << ',' << t.n << '\n';
            std::cout << "triplets\t" << set.items.size() << "\n";
            std::cout << "skipped_anchors\t" << set.skipped_anchors << "\n";
        } else if (train_cmd->parsed()) {
            std::vector<std::string> problems;
            train_cluster_flags.validate(problems);
            train_flags.validate(problems);
            if (!train_self_cluster && train_labels_path.empty())
                problems.push_back("either --labels or --self-cluster is required");
            fail_all(problems);
            const rpml::Matrix X =
                load_features_flag(train_cluster_flags.features, train_cluster_flags.format);
            const rpml::Labels pseudo = train_self_cluster
                                            ? self_cluster(X, train_cluster_flags)
                                            : rpml::load_labels(train_labels_path);
            const rpml::TrainConfig cfg = train_flags.resolved();
            const rpml::FitResult fit = rpml::fit(X, pseudo, cfg);
            rpml::save_embedding(fit.params.L, train_out);
            write_trace(fit.report, std::cerr);
            if (!train_trace.empty()) {
                std::ofstream tf(train_trace);
                if (!tf)
                    throw rpml::DataError("cannot write " + train_trace);
                write_trace(fit.report, tf);
            }
            if (!train_checkpoint.empty())
                rpml::save_checkpoint(train_checkpoint, fit.params, cfg.variant,
                                      fit.report.iterations);
            std::cout << "final_cost\t" << fmt17(fit.report.cost_trace.back()) << "\n";
            std::cout << "triplets\t" << fit.report.triplet_count << "\n";
        } else if (embed_cmd->parsed()) {
            const rpml::Matrix X = load_features_flag(embed_flags.features, embed_flags.format);
            const rpml::Matrix L = rpml::load_embedding(embed_flags.embedding);
            rpml::save_features(rpml::embed(L, X), embed_flags.out);
        } else if (eval_cmd->parsed()) {
            std::vector<std::string> problems;
            for (int k : eval_flags.ks)
                if (k < 1)
                    problems.push_back("--ks entries must be >= 1");
            if (eval_flags.restarts < 1)
                problems.push_back("--restarts must be >= 1");
            if (eval_flags.threads < 1)
                problems.push_back("--threads must be >= 1");
            fail_all(problems);
            const rpml::Matrix E = load_features_flag(eval_flags.features, eval_flags.format);
            const rpml::Labels truth = rpml::load_labels(eval_flags.labels);
            const rpml::EvalResult result =
                rpml::evaluate(E, truth, eval_flags.ks, eval_flags.seed, eval_flags.restarts,
                               eval_flags.threads);
            print_metrics(result, std::cout);
        } else if (pipe_cmd->parsed()) {
            std::vector<std::string> problems;
            pipe_cluster_flags.validate(problems);
            pipe_train_flags.validate(problems);
            for (int k : pipe_flags.ks)
                if (k < 1)
                    problems.push_back("--ks entries must be >= 1");
            if (pipe_flags.restarts < 1)
                problems.push_back("--restarts must be >= 1");
            const bool eval_on_test = !pipe_flags.test_features.empty();
            if (eval_on_test && pipe_flags.test_labels.empty())
                problems.push_back("--test-labels is required with --test-features");
            if (!eval_on_test && pipe_flags.labels.empty())
                problems.push_back("--labels (ground truth) is required without --test-features");
            fail_all(problems);

            const rpml::Matrix X =
                load_features_flag(pipe_cluster_flags.features, pipe_cluster_flags.format);
            if (X.rows() < 2)
                throw rpml::DataError("need at least 2 examples");
            const rpml::ClusterAssignment assignment = rpml::cluster(X, pipe_cluster_flags.cfg);
            std::cerr << "clustered " << X.rows() << " examples into "
                      << assignment.cluster_count << " pseudo-clusters\n";
            if (!pipe_flags.out_labels.empty())
                rpml::save_labels(assignment.labels, pipe_flags.out_labels);

            const rpml::TrainConfig cfg = pipe_train_flags.resolved();
            const rpml::FitResult fit = rpml::fit(X, assignment.labels, cfg);
            write_trace(fit.report, std::cerr);
            if (!pipe_flags.trace.empty()) {
                std::ofstream tf(pipe_flags.trace);
                if (!tf)
                    throw rpml::DataError("cannot write " + pipe_flags.trace);
                write_trace(fit.report, tf);
            }
            if (!pipe_flags.out_embedding.empty())
                rpml::save_embedding(fit.params.L, pipe_flags.out_embedding);

            const rpml::Matrix eval_X =
                eval_on_test ? rpml::load_features(pipe_flags.test_features) : X;
            const rpml::Labels truth = rpml::load_labels(
                eval_on_test ? pipe_flags.test_labels : pipe_flags.labels);
            const rpml::Matrix E = rpml::embed(fit.params.L, eval_X);
            const rpml::EvalResult result =
                rpml::evaluate(E, truth, pipe_flags.ks, rpml::splitmix64(cfg.seed ^ kKmeansStream),
                               pipe_flags.restarts, pipe_cluster_flags.cfg.threads);
            print_metrics(result, std::cout);
        }
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const rpml::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const rpml::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const rpml::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
