// Command-line front end: fit, tune, bootstrap, simulate, eval, check-id, perturb-prior.

#include <fcntl.h>
#include <unistd.h>

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "srnet/srnet.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace srnet;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool force = false;
    unsigned threads = 1;
};

const std::set<std::string> kInputKeys{"expression", "prior", "groups", "standardize", "seed"};
const std::set<std::string> kFitKeys{"lambda1", "lambda2",    "mode",      "alpha",          "outer_tol",
                                     "max_outer_iters", "n_restarts", "solver_tol", "solver_max_sweeps"};
const std::set<std::string> kGridKeys{"lambda1_grid", "lambda1_log2", "lambda2_grid", "lambda2_log2"};

std::set<std::string> allowed_keys(const std::string& command)
{
    std::set<std::string> keys{"seed"};
    auto add = [&](const std::set<std::string>& more) { keys.insert(more.begin(), more.end()); };
    if (command == "fit") {
        add(kInputKeys);
        add(kFitKeys);
    } else if (command == "tune") {
        add(kInputKeys);
        add(kFitKeys);
        add(kGridKeys);
        keys.insert("cv_folds");
    } else if (command == "bootstrap") {
        add(kInputKeys);
        add(kFitKeys);
        add({"replicates", "fdr", "ci_level"});
    } else if (command == "simulate") {
        add({"base_a", "base_p", "prior", "groups", "genes", "factors", "group_sizes", "density",
             "documented_fraction", "group_activity", "min_per_factor", "s_A", "s_P", "s_N", "rho"});
    } else if (command == "eval") {
        add(kInputKeys);
        add(kFitKeys);
        add(kGridKeys);
        add({"truth", "estimate", "categories"});
    } else if (command == "check-id") {
        add({"prior", "activity"});
    } else if (command == "perturb-prior") {
        add({"prior", "n_promote"});
    }
    return keys;
}

std::string sha256_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::IoError, "cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    require(ctx != nullptr, ErrorKind::IoError, "digest context allocation failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int k = 0; k < len; ++k) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[k]);
    }
    return hex.str();
}

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

/// Exclusive lock on the output directory, released on scope exit.
class DirLock
{
public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".srnet.lock")
    {
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        require(fd >= 0, ErrorKind::IoError,
                "output directory is locked by another run (remove " + path_.string() + " if stale)");
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
        ::close(fd);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;
    ~DirLock()
    {
        std::error_code ec;
        fs::remove(path_, ec);
    }

private:
    fs::path path_;
};

/// Per-invocation state: config, resolved inputs and declared outputs.
class Run
{
public:
    Run(std::string command, const Options& opt) : command_(std::move(command)), opt_(opt)
    {
        config_ = Config::load(opt.config);
        base_ = fs::path(opt.config).parent_path();
        const auto allowed = allowed_keys(command_);
        for (const auto& [key, value] : config_.entries()) {
            require(allowed.count(key) != 0, ErrorKind::InvalidArgument,
                    "unknown config key '" + key + "' for command " + command_);
        }
        inputs_.push_back({"config", fs::path(opt.config)});
        started_ = utc_now();
    }

    const Config& config() const { return config_; }
    unsigned threads() const { return opt_.threads; }

    bool has(const std::string& key) const { return config_.has(key); }

    /// Resolves an input path relative to the config file and records it for the manifest.
    std::string input(const std::string& key)
    {
        fs::path p = config_.require_string(key);
        if (p.is_relative()) {
            p = base_ / p;
        }
        inputs_.push_back({key, p});
        return p.string();
    }

    std::uint64_t seed()
    {
        if (!seed_) {
            if (opt_.seed) {
                seed_ = *opt_.seed;
            } else {
                require(config_.has("seed"), ErrorKind::InvalidArgument,
                        "command " + command_ + " needs an explicit seed (--seed or config key 'seed')");
                seed_ = config_.get_u64("seed", 0);
            }
        }
        return *seed_;
    }

    /// Declares the artifacts this run writes; refuses to clobber without --force.
    void claim(const std::vector<std::string>& names)
    {
        out_ = opt_.out_dir;
        fs::create_directories(out_);
        std::vector<std::string> all = names;
        all.push_back("manifest.json");
        for (const auto& n : all) {
            require(opt_.force || !fs::exists(out_ / n), ErrorKind::IoError,
                    (out_ / n).string() + " exists; pass --force to overwrite");
        }
        outputs_ = names;
        lock_.emplace(out_);
    }

    std::string out(const std::string& name) const { return (out_ / name).string(); }

    json& results() { return results_; }

    void write_manifest()
    {
        json m;
        m["software"] = "srnet";
        m["version"] = SRNET_VERSION;
        m["command"] = command_;
        if (seed_) {
            m["seed"] = *seed_;
        }
        m["threads"] = opt_.threads;
        m["config"] = config_.entries();
        json inputs = json::array();
        for (const auto& [key, path] : inputs_) {
            inputs.push_back({{"key", key}, {"path", path.string()}, {"sha256", sha256_file(path)}});
        }
        m["inputs"] = inputs;
        m["outputs"] = outputs_;
        m["results"] = results_;
        m["started"] = started_;
        m["finished"] = utc_now();
        std::ofstream o(out("manifest.json"));
        require(o.good(), ErrorKind::IoError, "cannot write manifest");
        o << m.dump(2) << '\n';
    }

private:
    std::string command_;
    Options opt_;
    Config config_;
    fs::path base_;
    fs::path out_;
    std::vector<std::pair<std::string, fs::path>> inputs_;
    std::vector<std::string> outputs_;
    std::optional<std::uint64_t> seed_;
    std::optional<DirLock> lock_;
    json results_ = json::object();
    std::string started_;
};

// ---------------------------------------------------------------------------
// Shared loading

struct Inputs {
    ExpressionMatrix E;
    PriorMatrix prior;
    GroupPartition groups;
};

Inputs load_inputs(Run& run)
{
    Inputs in;
    in.E = load_expression(run.input("expression"));
    if (run.config().get_bool("standardize", true)) {
        in.E = standardize_experiments(in.E);
    }
    in.prior = match_prior(load_prior(run.input("prior")), in.E);
    in.groups = run.has("groups") ? load_groups(run.input("groups"), in.E.experiment_ids)
                                  : GroupPartition::single(in.E.experiments());
    return in;
}

FitConfig fit_config(Run& run)
{
    const Config& c = run.config();
    FitConfig f;
    f.lambda1 = c.get_double("lambda1", f.lambda1);
    f.lambda2 = c.get_double("lambda2", f.lambda2);
    const std::string mode = c.get("mode", "ungrouped");
    require(mode == "ungrouped" || mode == "grouped", ErrorKind::InvalidArgument,
            "mode must be 'ungrouped' or 'grouped', got '" + mode + "'");
    f.mode = mode == "grouped" ? PenaltyMode::Grouped : PenaltyMode::Ungrouped;
    f.alpha = c.get_double("alpha", f.alpha);
    f.outer_tol = c.get_double("outer_tol", f.outer_tol);
    f.max_outer_iters = static_cast<int>(c.get_int("max_outer_iters", f.max_outer_iters));
    f.n_restarts = static_cast<int>(c.get_int("n_restarts", f.n_restarts));
    f.solver.tolerance = c.get_double("solver_tol", f.solver.tolerance);
    f.solver.max_sweeps = static_cast<int>(c.get_int("solver_max_sweeps", f.solver.max_sweeps));
    f.seed = run.seed();
    f.validate();
    return f;
}

/// Rows and columns of a labeled matrix permuted into the requested id order.
Matrix reorder(const LabeledMatrix& m, const std::vector<std::string>& rows, const std::vector<std::string>& cols,
               const std::string& what)
{
    auto positions = [&](const std::vector<std::string>& have, const std::vector<std::string>& want) {
        require(have.size() == want.size(), ErrorKind::ShapeMismatch,
                what + ": expected " + std::to_string(want.size()) + " ids, found " + std::to_string(have.size()));
        std::vector<Index> pos;
        for (const auto& id : want) {
            const auto it = std::find(have.begin(), have.end(), id);
            require(it != have.end(), ErrorKind::UnknownId, what + ": missing id '" + id + "'");
            pos.push_back(static_cast<Index>(it - have.begin()));
        }
        return pos;
    };
    const auto r = positions(m.row_ids, rows);
    const auto c = positions(m.col_ids, cols);
    Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t i = 0; i < r.size(); ++i) {
        for (std::size_t j = 0; j < c.size(); ++j) {
            out(static_cast<Index>(i), static_cast<Index>(j)) = m.values(r[i], c[j]);
        }
    }
    return out;
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string("NA"); }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_fit(Run& run, const Inputs& in, const FitResult& fit)
{
    const auto& genes = in.E.gene_ids;
    const auto& tfs = in.prior.tf_ids;
    const auto& exps = in.E.experiment_ids;
    write_matrix_tsv(run.out("A.tsv"), "gene", genes, tfs, fit.A);
    write_matrix_tsv(run.out("P.tsv"), "tf", tfs, exps, fit.P);
    write_matrix_tsv(run.out("tilde_a.tsv"), "gene", genes, tfs, fit.tilde_a);
    write_matrix_tsv(run.out("tilde_p.tsv"), "tf", tfs, exps, fit.tilde_p);
}

void write_groups(const std::string& path, const std::vector<std::string>& experiments, const GroupPartition& g)
{
    std::ofstream o(path);
    require(o.good(), ErrorKind::IoError, "cannot write " + path);
    o << "experiment\tgroup\n";
    for (Index t = 0; t < g.size(); ++t) {
        o << experiments[static_cast<std::size_t>(t)] << "\tG" << g.label(t) + 1 << '\n';
    }
}

// ---------------------------------------------------------------------------
// Commands

void cmd_fit(Run& run)
{
    const Inputs in = load_inputs(run);
    const FitConfig cfg = fit_config(run);
    std::vector<std::string> outs{"A.tsv", "P.tsv", "tilde_a.tsv", "tilde_p.tsv", "edges.tsv", "trace.tsv"};
    if (cfg.n_restarts > 1) {
        outs.push_back("restarts.tsv");
    }
    run.claim(outs);

    const Matrix pi_tilde = shrink_prior(in.prior.probs, cfg.alpha);
    FitResult fit;
    if (cfg.n_restarts > 1) {
        const RestartSummary rs = multi_restart(in.E, pi_tilde, in.groups, cfg, run.threads());
        fit = rs.best;
        std::ofstream o(run.out("restarts.tsv"));
        o << "rank\tseed\tobjective\tconverged\titerations\tp_rmse_to_best\n";
        for (std::size_t k = 0; k < rs.order.size(); ++k) {
            const FitResult& r = rs.runs[rs.order[k]];
            o << k + 1 << '\t' << r.seed << '\t' << format_real(r.final_objective()) << '\t' << r.converged << '\t'
              << r.iterations << '\t'
              << format_real(rs.dispersion(static_cast<Index>(rs.order.front()), static_cast<Index>(rs.order[k])))
              << '\n';
        }
    } else {
        fit = fit_alternating(in.E, pi_tilde, in.groups, cfg);
    }
    write_fit(run, in, fit);
    write_edge_list(run.out("edges.tsv"), in.E.gene_ids, in.prior.tf_ids, fit.A, fit.tilde_a);
    {
        std::ofstream o(run.out("trace.tsv"));
        o << "half_step\tobjective\n";
        for (std::size_t k = 0; k < fit.objective_trace.size(); ++k) {
            o << k << '\t' << format_real(fit.objective_trace[k]) << '\n';
        }
    }
    run.results() = {{"objective", fit.final_objective()},
                     {"converged", fit.converged},
                     {"iterations", fit.iterations},
                     {"edges", (fit.A.array() != 0.0).count()}};
    std::cout << "fit: " << (fit.A.array() != 0.0).count() << " edges, objective " << format_real(fit.final_objective())
              << (fit.converged ? "" : " (not converged)") << '\n';
}

void cmd_tune(Run& run)
{
    const Inputs in = load_inputs(run);
    const FitConfig cfg = fit_config(run);
    CvPlan plan;
    plan.n_folds = static_cast<int>(run.config().get_int("cv_folds", plan.n_folds));
    plan.seed = derive_seed(run.seed(), 1);
    const auto grid = make_grid(run.config().get_grid("lambda1"), run.config().get_grid("lambda2"));
    run.claim({"cv_table.tsv", "selected.tsv"});

    const Matrix pi_tilde = shrink_prior(in.prior.probs, cfg.alpha);
    const CvOutcome cv = relaxed_cv(in.E, pi_tilde, in.groups, grid, plan, cfg, run.threads());
    {
        std::ofstream o(run.out("cv_table.tsv"));
        o << "lambda1\tlambda2\tmean_cv_error\tstd_error\n";
        for (const CvRow& r : cv.table) {
            o << format_real(r.lambda1) << '\t' << format_real(r.lambda2) << '\t' << format_real(r.mean_cv_error)
              << '\t' << format_real(r.std_error) << '\n';
        }
    }
    {
        std::ofstream o(run.out("selected.tsv"));
        o << "lambda1\tlambda2\n" << format_real(cv.selected.lambda1) << '\t' << format_real(cv.selected.lambda2) << '\n';
    }
    run.results() = {{"lambda1", cv.selected.lambda1}, {"lambda2", cv.selected.lambda2}};
    std::cout << "tune: selected lambda1=" << format_real(cv.selected.lambda1)
              << " lambda2=" << format_real(cv.selected.lambda2) << '\n';
}

void cmd_bootstrap(Run& run)
{
    const Inputs in = load_inputs(run);
    const FitConfig cfg = fit_config(run);
    const int B = static_cast<int>(run.config().get_int("replicates", 100));
    const double q = run.config().get_double("fdr", 0.05);
    const double level = run.config().get_double("ci_level", 0.9);
    run.claim({"A.tsv", "P.tsv", "tilde_a.tsv", "tilde_p.tsv", "pvalues.tsv", "tilde_a_lower.tsv",
               "tilde_a_upper.tsv", "tilde_p_lower.tsv", "tilde_p_upper.tsv", "edges.tsv", "edges_pruned.tsv",
               "samples"});

    const Matrix pi_tilde = shrink_prior(in.prior.probs, cfg.alpha);
    const FitResult fit = fit_best(in.E, pi_tilde, in.groups, cfg, run.threads());
    const BootstrapResult boot =
        bootstrap_fit(in.E, fit.A, fit.P, pi_tilde, in.groups, cfg, B, derive_seed(run.seed(), 2), run.threads());
    const Intervals iv = bootstrap_intervals(boot, level);
    const BhSelection bh = bh_select(boot.pvalues, boot.tested, q);
    const Matrix pruned = prune_network(fit.A, boot.pvalues, boot.tested, bh.cutoff);

    const auto& genes = in.E.gene_ids;
    const auto& tfs = in.prior.tf_ids;
    const auto& exps = in.E.experiment_ids;
    write_fit(run, in, fit);
    LabeledMatrix pv;
    pv.corner = "gene";
    pv.row_ids = genes;
    pv.col_ids = tfs;
    pv.values = boot.pvalues;
    pv.observed = boot.tested;
    write_labeled_tsv(run.out("pvalues.tsv"), pv);
    write_matrix_tsv(run.out("tilde_a_lower.tsv"), "gene", genes, tfs, iv.a_lower);
    write_matrix_tsv(run.out("tilde_a_upper.tsv"), "gene", genes, tfs, iv.a_upper);
    write_matrix_tsv(run.out("tilde_p_lower.tsv"), "tf", tfs, exps, iv.p_lower);
    write_matrix_tsv(run.out("tilde_p_upper.tsv"), "tf", tfs, exps, iv.p_upper);
    write_edge_list(run.out("edges.tsv"), genes, tfs, fit.A, fit.tilde_a, &boot.pvalues);
    write_edge_list(run.out("edges_pruned.tsv"), genes, tfs, pruned, fit.tilde_a, &boot.pvalues);
    save_bootstrap_archive(run.out("samples"), {boot, genes, tfs, exps});

    const auto kept = (pruned.array() != 0.0).count();
    run.results() = {{"replicates", B},
                     {"fdr", q},
                     {"ci_level", level},
                     {"pvalue_cutoff", bh.cutoff},
                     {"edges", (fit.A.array() != 0.0).count()},
                     {"edges_pruned", kept}};
    std::cout << "bootstrap: " << kept << " of " << (fit.A.array() != 0.0).count() << " edges kept at FDR " << q
              << '\n';
}

void cmd_simulate(Run& run)
{
    const Config& c = run.config();
    SimConfig sim;
    sim.s_A = c.get_double("s_A", sim.s_A);
    sim.s_P = c.get_double("s_P", sim.s_P);
    sim.s_N = c.get_double("s_N", sim.s_N);
    sim.rho = c.get_double("rho", sim.rho);
    sim.seed = derive_seed(run.seed(), 1);

    Matrix base_A, base_P;
    PriorMatrix prior;
    GroupPartition groups;
    std::vector<std::string> experiments;
    if (run.has("base_a") || run.has("base_p")) {
        prior = load_prior(run.input("prior"));
        const LabeledMatrix p = read_labeled_tsv(run.input("base_p"), false);
        experiments = p.col_ids;
        base_A = reorder(read_labeled_tsv(run.input("base_a"), false), prior.gene_ids, prior.tf_ids, "base_a");
        base_P = reorder(p, prior.tf_ids, experiments, "base_p");
        groups = run.has("groups") ? load_groups(run.input("groups"), experiments)
                                   : GroupPartition::single(static_cast<Index>(experiments.size()));
    } else {
        PlantSpec spec;
        spec.genes = c.get_int("genes", spec.genes);
        spec.factors = c.get_int("factors", spec.factors);
        if (c.has("group_sizes")) {
            spec.group_sizes.clear();
            for (double s : c.get_list("group_sizes")) {
                require(s >= 1.0 && s == std::floor(s), ErrorKind::InvalidArgument,
                        "group_sizes must be positive integers");
                spec.group_sizes.push_back(static_cast<Index>(s));
            }
        }
        spec.density = c.get_double("density", spec.density);
        spec.documented_fraction = c.get_double("documented_fraction", spec.documented_fraction);
        spec.group_activity = c.get_double("group_activity", spec.group_activity);
        spec.min_per_factor = c.get_int("min_per_factor", spec.min_per_factor);
        spec.seed = derive_seed(run.seed(), 0);
        PlantedBase planted = plant_base(spec);
        base_A = std::move(planted.A);
        base_P = std::move(planted.P);
        prior = std::move(planted.pi);
        groups = std::move(planted.groups);
        for (Index t = 0; t < base_P.cols(); ++t) {
            experiments.push_back("e" + std::to_string(t + 1));
        }
    }
    run.claim({"expression.tsv", "prior.tsv", "groups.tsv", "A_true.tsv", "P_true.tsv"});

    SimulatedDataset data = simulate_dataset(base_A, base_P, prior, sim);
    data.E.gene_ids = prior.gene_ids;
    data.E.experiment_ids = experiments;
    save_expression(run.out("expression.tsv"), data.E);
    save_prior(run.out("prior.tsv"), data.pi);
    write_groups(run.out("groups.tsv"), experiments, groups);
    write_matrix_tsv(run.out("A_true.tsv"), "gene", prior.gene_ids, prior.tf_ids, data.A_true);
    write_matrix_tsv(run.out("P_true.tsv"), "tf", prior.tf_ids, experiments, data.P_true);
    run.results() = {{"genes", data.E.genes()},
                     {"factors", prior.factors()},
                     {"experiments", data.E.experiments()},
                     {"true_edges", (data.A_true.array() != 0.0).count()}};
    std::cout << "simulate: " << data.E.genes() << " genes, " << prior.factors() << " TFs, " << data.E.experiments()
              << " experiments\n";
}

void cmd_eval(Run& run)
{
    const bool with_truth = run.has("truth");
    const bool with_estimate = run.has("estimate");
    const bool with_categories = run.has("categories");
    require(with_truth || with_categories, ErrorKind::InvalidArgument,
            "eval needs 'truth' (rates or ROC) and/or 'categories' (category report)");
    require(!with_categories || with_estimate, ErrorKind::InvalidArgument, "the category report needs 'estimate'");
    std::vector<std::string> outs;
    if (with_truth) {
        outs.push_back(with_estimate ? "rates.tsv" : "roc.tsv");
    }
    if (with_categories) {
        outs.push_back("category_report.tsv");
    }

    if (with_truth && !with_estimate) {
        const Inputs in = load_inputs(run);
        const FitConfig cfg = fit_config(run);
        SimulatedDataset data;
        data.E = in.E;
        data.pi = in.prior;
        data.A_true = reorder(read_labeled_tsv(run.input("truth"), false), in.E.gene_ids, in.prior.tf_ids, "truth");
        const auto grid = make_grid(run.config().get_grid("lambda1"), run.config().get_grid("lambda2"));
        run.claim(outs);
        const auto roc = roc_sweep(data, grid, in.groups, cfg, run.threads());
        std::ofstream o(run.out("roc.tsv"));
        o << "lambda1\tlambda2\tfpr\ttpr\n";
        for (const RocPoint& r : roc) {
            o << format_real(r.lambda1) << '\t' << format_real(r.lambda2) << '\t' << opt_real(r.fpr) << '\t'
              << opt_real(r.tpr) << '\n';
        }
        run.results()["roc_points"] = roc.size();
        std::cout << "eval: ROC over " << roc.size() << " grid points\n";
    }
    if (with_estimate) {
        const LabeledMatrix est = read_labeled_tsv(run.input("estimate"), false);
        std::optional<Rates> rates;
        std::optional<CategoryFractions> fractions;
        if (with_truth) {
            const PriorMatrix prior = load_prior(run.input("prior"));
            const Matrix truth =
                reorder(read_labeled_tsv(run.input("truth"), false), prior.gene_ids, prior.tf_ids, "truth");
            const Matrix A = reorder(est, prior.gene_ids, prior.tf_ids, "estimate");
            rates = confusion_rates(apply_alignment(A, sequential_align(A, truth)), truth, prior.probs);
        }
        if (with_categories) {
            const CategoryMatrix cats = load_categories(run.input("categories"), est.row_ids, est.col_ids);
            fractions = category_report(est.values, cats);
        }
        run.claim(outs);
        if (rates) {
            std::ofstream o(run.out("rates.tsv"));
            o << "fpr\ttpr\n" << opt_real(rates->fpr) << '\t' << opt_real(rates->tpr) << '\n';
            run.results()["fpr"] = opt_json(rates->fpr);
            run.results()["tpr"] = opt_json(rates->tpr);
            std::cout << "eval: FPR " << opt_real(rates->fpr) << ", TPR " << opt_real(rates->tpr) << '\n';
        }
        if (fractions) {
            std::ofstream o(run.out("category_report.tsv"));
            o << "category\tnonzero_fraction\n"
              << "DOCUMENTED\t" << opt_real(fractions->documented) << '\n'
              << "SUGGESTED\t" << opt_real(fractions->suggested) << '\n'
              << "NONE\t" << opt_real(fractions->none) << '\n';
            run.results()["documented"] = opt_json(fractions->documented);
            run.results()["suggested"] = opt_json(fractions->suggested);
            run.results()["none"] = opt_json(fractions->none);
            std::cout << "eval: nonzero fraction DOCUMENTED " << opt_real(fractions->documented) << ", SUGGESTED "
                      << opt_real(fractions->suggested) << ", NONE " << opt_real(fractions->none) << '\n';
        }
    }
}

void cmd_check_id(Run& run)
{
    const PriorMatrix prior = load_prior(run.input("prior"));
    const LabeledMatrix act = read_labeled_tsv(run.input("activity"), false);
    const Matrix P = reorder(act, prior.tf_ids, act.col_ids, "activity");
    run.claim({"identifiability.json"});
    const NcaReport r = check_nca_identifiability(prior.probs.array() > 0.0, P);
    json failing = json::array();
    for (Index j : r.failing_columns) {
        failing.push_back(prior.tf_ids[static_cast<std::size_t>(j)]);
    }
    const json report = {{"support_full_column_rank", r.cond1},
                         {"support_full_rank_after_removals", r.cond2},
                         {"activity_full_row_rank", r.cond3},
                         {"failing_tfs", failing},
                         {"identifiable", r.all()}};
    std::ofstream o(run.out("identifiability.json"));
    o << report.dump(2) << '\n';
    run.results() = report;
    std::cout << "check-id: " << (r.all() ? "identifiable" : "not identifiable") << '\n';
}

void cmd_perturb_prior(Run& run)
{
    const PriorMatrix prior = load_prior(run.input("prior"));
    const long long n = run.config().get_int("n_promote", 200);
    run.claim({"prior_perturbed.tsv", "categories.tsv"});
    const PriorMatrix perturbed = perturb_prior(prior, static_cast<Index>(n), run.seed());
    save_prior(run.out("prior_perturbed.tsv"), perturbed);
    save_categories(run.out("categories.tsv"), prior.gene_ids, prior.tf_ids,
                    categorize_edges(prior.probs, perturbed.probs));
    run.results() = {{"promoted", n}};
    std::cout << "perturb-prior: promoted " << n << " zero entries\n";
}

int fail(const std::string& kind, const std::string& message, int code)
{
    const json record = {{"error", kind}, {"message", message}, {"exit_code", code}};
    std::cerr << record.dump() << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sparse regulatory network estimation from expression data and a prior"};
    app.require_subcommand(1);
    Options opt;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"fit", "fit A and P at fixed lambdas"},
        {"tune", "select lambdas by relaxed cross-validation"},
        {"bootstrap", "bootstrap p-values, intervals and an FDR-pruned network"},
        {"simulate", "generate a synthetic dataset"},
        {"eval", "FPR/TPR, ROC sweep or evidence-category report"},
        {"check-id", "check identifiability of a support pattern and activity matrix"},
        {"perturb-prior", "promote prior zeros to 0.5 and record edge categories"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config, "key = value configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out-dir", opt.out_dir, "output directory")->required();
        sub->add_option("--seed", opt.seed, "random seed (overrides config key 'seed')");
        sub->add_flag("--force", opt.force, "overwrite existing outputs");
        sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("UsageError", e.what(), 2);
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        Run run(command, opt);
        if (command == "fit") {
            cmd_fit(run);
        } else if (command == "tune") {
            cmd_tune(run);
        } else if (command == "bootstrap") {
            cmd_bootstrap(run);
        } else if (command == "simulate") {
            cmd_simulate(run);
        } else if (command == "eval") {
            cmd_eval(run);
        } else if (command == "check-id") {
            cmd_check_id(run);
        } else {
            cmd_perturb_prior(run);
        }
        run.write_manifest();
    } catch (const Error& e) {
        return fail(to_string(e.kind()), e.what(), is_numerical(e.kind()) ? 3 : 2);
    } catch (const fs::filesystem_error& e) {
        return fail(to_string(ErrorKind::IoError), e.what(), 2);
    } catch (const std::exception& e) {
        return fail("InternalError", e.what(), 2);
    }
    return 0;
}
