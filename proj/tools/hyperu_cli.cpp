// hyperu: estimate hyperuniformity exponents, simulate reference processes.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 bad input or arguments,
// 3 empty pattern, 4 numerical failure.

#include <glob.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <hyperu/hyperu.hpp>

namespace {

using nlohmann::json;
using namespace hyperu;

constexpr int kExitParse = 2;
constexpr int kExitEmpty = 3;
constexpr int kExitNumerical = 4;

struct EmptyInputPattern : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct TaperOptions
{
    int imax = 10;
    double scale = 5.0;
    double eps = kDefaultSupportEps;
    int dim = 2;

    TaperPreset preset() const { return {dim, imax, scale, eps}; }
};

void add_taper_options(CLI::App& cmd, TaperOptions& t)
{
    cmd.add_option("--dim", t.dim, "Dimension of the points")->check(CLI::Range(1, 2));
    cmd.add_option("--imax", t.imax, "Taper indices satisfy |i|_inf < imax")->check(CLI::Range(2, 16));
    cmd.add_option("--taper-scale", t.scale, "Taper dilation factor c in f_i = psi_i(c x)")->check(CLI::PositiveNumber);
    cmd.add_option("--support-eps", t.eps, "Relative threshold defining taper supports")->check(CLI::Range(1e-16, 0.5));
}

// Expands shell patterns in order; plain paths pass through unchanged.
std::vector<std::string> expand_inputs(const std::vector<std::string>& args)
{
    std::vector<std::string> out;
    for (const auto& a : args)
    {
        if (a.find_first_of("*?[") == std::string::npos)
        {
            out.push_back(a);
            continue;
        }
        glob_t g{};
        const int rc = ::glob(a.c_str(), 0, nullptr, &g);
        if (rc == 0)
            for (std::size_t k = 0; k < g.gl_pathc; ++k)
                out.emplace_back(g.gl_pathv[k]);
        globfree(&g);
        if (rc != 0)
            throw ParseError("no file matches " + a);
    }
    return out;
}

void write_text(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-")
    {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ParseError("cannot write " + path);
    out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::vector<PointPattern> load_frames(const std::vector<std::string>& paths, int dim, std::optional<double> r)
{
    std::vector<PointPattern> frames;
    for (const auto& p : paths)
        frames.push_back(load_pattern(p, dim, r));
    return frames;
}

// Mean of per-frame curves on a shared grid.
CurveC average_curves(const std::vector<CurveC>& curves)
{
    CurveC mean = curves.front();
    for (std::size_t f = 1; f < curves.size(); ++f)
        for (std::size_t k = 0; k < mean.values.size(); ++k)
            mean.values[k] += curves[f].values[k];
    for (double& v : mean.values)
        v /= static_cast<double>(curves.size());
    double r = 0.0;
    for (const auto& c : curves)
        r += c.half_width;
    mean.half_width = r / static_cast<double>(curves.size());
    return mean;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateOptions
{
    std::vector<std::string> inputs;
    std::optional<double> half_width;
    TaperOptions tapers;
    std::optional<double> jmin;
    std::optional<double> jmax;
    std::vector<double> scales;
    std::size_t nscales = kDefaultScaleCount;
    std::optional<double> ci_level;
    std::size_t ci_draws = kDefaultDraws;
    bool ci_full = false;
    std::uint64_t seed = 0;
    std::string output;
    std::string curve_output;
    std::size_t poisson_reference = 0;
};

json estimate_echo(const EstimateOptions& o, const std::vector<std::string>& files)
{
    json j;
    j["command"] = "estimate";
    j["inputs"] = files;
    j["half_width"] = o.half_width ? json(*o.half_width) : json(nullptr);
    j["tapers"] = to_json(o.tapers.preset());
    j["jmin"] = o.jmin ? json(*o.jmin) : json(nullptr);
    j["jmax"] = o.jmax ? json(*o.jmax) : json(nullptr);
    j["scales"] = o.scales;
    j["nscales"] = o.nscales;
    j["ci_level"] = o.ci_level ? json(*o.ci_level) : json(nullptr);
    j["ci_draws"] = o.ci_draws;
    j["ci_full"] = o.ci_full;
    j["seed"] = o.seed;
    j["poisson_reference"] = o.poisson_reference;
    j["rng"] = Rng::kVersion;
    return j;
}

int run_estimate(const EstimateOptions& o)
{
    const auto files = expand_inputs(o.inputs);
    const auto frames = load_frames(files, o.tapers.dim, o.half_width);
    for (std::size_t f = 0; f < frames.size(); ++f)
        if (frames[f].empty())
            throw EmptyInputPattern(files[f] + ": pattern has no points inside the window");

    const TaperSet set = build_taper_set(o.tapers.preset());
    EstimatorConfig cfg;
    cfg.j_min = o.jmin;
    cfg.j_max = o.jmax;
    cfg.explicit_scales = o.scales;
    cfg.n_scales = o.nscales;

    IntervalOptions iopt;
    if (o.ci_level)
        iopt.a = 1.0 - *o.ci_level;
    iopt.draws = o.ci_draws;
    iopt.full = o.ci_full;

    const auto grid = diagnostic_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_points);
    std::vector<json> docs;
    std::vector<EstimateReport> reports;
    std::vector<CurveC> curves;
    for (std::size_t f = 0; f < frames.size(); ++f)
    {
        EstimateReport rep = estimate_pattern(frames[f], set, cfg);
        if (!o.curve_output.empty() && rep.curve.grid.empty())
            rep.curve = curve_C(normalize_intensity(frames[f]).first, set, grid);

        std::optional<PatternInterval> ci;
        if (o.ci_level)
        {
            iopt.seed = Rng(o.seed, f + 1).next_u64();
            ci = interval_for_pattern(frames[f], rep, o.tapers.preset(), iopt);
        }
        json doc = report_to_json(rep, ci ? &ci->ci : nullptr, o.curve_output);
        if (ci)
        {
            doc["ci"]["n_tapers"] = ci->basis.n_tapers;
            doc["ci"]["n_scales"] = ci->basis.plan.size();
        }
        doc["source"] = files[f];
        if (o.poisson_reference > 0)
        {
            PoissonCalibration pc;
            pc.replicates = o.poisson_reference;
            pc.seed = o.seed;
            doc["j_max_poisson"] = calibrate_jmax_poisson(set, rep.half_width, pc);
        }
        docs.push_back(std::move(doc));
        if (!rep.curve.grid.empty())
            curves.push_back(rep.curve);
        reports.push_back(std::move(rep));
    }

    if (!o.curve_output.empty())
    {
        const CurveC mean = average_curves(curves);
        std::ostringstream csv;
        if (o.poisson_reference > 0)
        {
            const auto ref = poisson_reference_curve(set, mean.half_width, mean.grid, o.poisson_reference, o.seed);
            write_curve_csv(csv, mean, &ref);
        }
        else
        {
            write_curve_csv(csv, mean);
        }
        write_text(o.curve_output, csv.str());
    }

    json out;
    if (docs.size() == 1)
    {
        out = std::move(docs.front());
    }
    else
    {
        out["schema_version"] = kSchemaVersion;
        out["pooled_alpha_hat"] = pooled_estimate(reports);
        out["n_frames"] = docs.size();
        out["frames"] = docs;
        out["curve_path"] = o.curve_output.empty() ? json(nullptr) : json(o.curve_output);
    }
    out["config_echo"] = estimate_echo(o, files);
    write_text(o.output, dump(out));
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions
{
    std::string model = "poisson";
    std::optional<double> lambda;
    double alpha = 1.0;
    double sigma = 0.25;
    double radius = 1.0;
    double half_width = 25.0;
    std::uint64_t seed = 0;
    std::string config;
    std::string output;
    std::string metadata;
};

double default_lambda(SimVariant v)
{
    switch (v)
    {
    case SimVariant::matched: return 2.0;
    case SimVariant::rsa: return 3.0;
    default: return 1.0;
    }
}

SimSpec spec_from_options(const SimulateOptions& o)
{
    if (!o.config.empty())
    {
        std::ifstream in(o.config);
        if (!in)
            throw ParseError("cannot open " + o.config);
        json j;
        try
        {
            in >> j;
        }
        catch (const json::exception& e)
        {
            throw ParseError(o.config + ": " + e.what());
        }
        return sim_spec_from_json(j.contains("spec") ? j["spec"] : j);
    }
    SimSpec s;
    s.variant = sim_variant_from_string(o.model);
    s.lambda = o.lambda ? *o.lambda : default_lambda(s.variant);
    s.alpha = o.alpha;
    s.sigma = o.sigma;
    s.radius = o.radius;
    s.half_width = o.half_width;
    s.seed = o.seed;
    return s;
}

int run_simulate(const SimulateOptions& o)
{
    const SimSpec spec = spec_from_options(o);
    const PointPattern p = simulate(spec);
    std::ostringstream csv;
    write_pattern_csv(csv, p);
    write_text(o.output, csv.str());

    json meta;
    meta["schema_version"] = kSchemaVersion;
    meta["spec"] = to_json(spec);
    meta["n_points"] = p.size();
    meta["rng"] = Rng::kVersion;
    std::string meta_path = o.metadata;
    if (meta_path.empty() && !o.output.empty() && o.output != "-")
        meta_path = o.output + ".json";
    if (!meta_path.empty())
        write_text(meta_path, dump(meta));
    return 0;
}

// ---------------------------------------------------------------------------
// curve
// ---------------------------------------------------------------------------

struct CurveOptions
{
    std::vector<std::string> inputs;
    std::optional<double> half_width;
    TaperOptions tapers;
    double grid_lo = 0.1;
    double grid_hi = 1.3;
    std::size_t grid_points = 120;
    std::size_t poisson_reference = 0;
    std::uint64_t seed = 0;
    std::string output;
};

int run_curve(const CurveOptions& o)
{
    if (!(o.grid_hi > o.grid_lo))
        throw DomainError("--grid-hi must exceed --grid-lo");
    const auto files = expand_inputs(o.inputs);
    const auto frames = load_frames(files, o.tapers.dim, o.half_width);
    const TaperSet set = build_taper_set(o.tapers.preset());
    const auto grid = diagnostic_grid(o.grid_lo, o.grid_hi, o.grid_points);
    std::vector<CurveC> curves;
    for (std::size_t f = 0; f < frames.size(); ++f)
    {
        if (frames[f].empty())
            throw EmptyInputPattern(files[f] + ": pattern has no points inside the window");
        curves.push_back(curve_C(normalize_intensity(frames[f]).first, set, grid));
    }
    const CurveC mean = average_curves(curves);
    std::ostringstream csv;
    if (o.poisson_reference > 0)
    {
        const auto ref = poisson_reference_curve(set, mean.half_width, grid, o.poisson_reference, o.seed);
        write_curve_csv(csv, mean, &ref);
    }
    else
    {
        write_curve_csv(csv, mean);
    }
    write_text(o.output, csv.str());
    return 0;
}

// ---------------------------------------------------------------------------
// coverage
// ---------------------------------------------------------------------------

struct CoverageOptions
{
    SimulateOptions sim;
    std::optional<double> true_alpha;
    std::size_t replicates = 100;
    TaperOptions tapers;
    double ci_level = 0.95;
    std::size_t ci_draws = kDefaultDraws;
    bool ci_full = false;
    std::string output;
};

int run_coverage(const CoverageOptions& o)
{
    if (o.replicates < 1)
        throw DomainError("--replicates must be at least 1");
    if (!(o.ci_level > 0.0 && o.ci_level < 1.0))
        throw DomainError("--ci-level must lie in (0, 1)");
    const SimSpec spec = spec_from_options(o.sim);
    double truth = 0.0;
    if (o.true_alpha)
        truth = *o.true_alpha;
    else if (spec.variant == SimVariant::cloaked_lattice)
        truth = spec.alpha;
    else if (spec.variant == SimVariant::matched)
        truth = 2.0;

    IntervalOptions iopt;
    iopt.a = 1.0 - o.ci_level;
    iopt.draws = o.ci_draws;
    iopt.full = o.ci_full;
    const auto res = coverage_study(spec, truth, o.replicates, o.tapers.preset(), iopt);

    json out;
    out["schema_version"] = kSchemaVersion;
    out["spec"] = to_json(spec);
    out["true_alpha"] = truth;
    out["replicates"] = res.replicates;
    out["covered"] = res.covered;
    out["coverage"] = res.rate();
    out["level"] = o.ci_level;
    out["tapers"] = to_json(interval_preset(o.tapers.preset(), iopt));
    out["n_scales"] = o.ci_full ? kDefaultScaleCount : iopt.reduced_scales;
    out["estimates"] = res.estimates;
    json cis = json::array();
    for (const auto& ci : res.intervals)
        cis.push_back(to_json(ci));
    out["intervals"] = cis;
    out["rng"] = Rng::kVersion;
    write_text(o.output, dump(out));
    return 0;
}

void add_sim_options(CLI::App& cmd, SimulateOptions& s)
{
    cmd.add_option("--model", s.model, "poisson, cloaked, matched or rsa")
        ->check(CLI::IsMember({"poisson", "cloaked", "matched", "rsa"}));
    cmd.add_option("--lambda", s.lambda, "Intensity (Poisson), lambda_p (matched) or proposal rate (rsa)")
        ->check(CLI::PositiveNumber);
    cmd.add_option("--alpha", s.alpha, "Cloaked lattice exponent in (0, 2]");
    cmd.add_option("--sigma", s.sigma, "Cloaked lattice displacement scale")->check(CLI::NonNegativeNumber);
    cmd.add_option("--radius", s.radius, "RSA hard-core distance")->check(CLI::NonNegativeNumber);
    cmd.add_option("--half-width", s.half_width, "Window [-R, R]^d")->check(CLI::PositiveNumber);
    cmd.add_option("--seed", s.seed, "Random seed");
    cmd.add_option("--config", s.config, "Read the simulation spec from a JSON file (overrides the flags above)");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hyperuniformity exponent estimation with multi-taper wavelet transforms"};
    app.require_subcommand(1);

    EstimateOptions est;
    auto* c_est = app.add_subcommand("estimate", "Estimate alpha for one pattern, or pool a sequence of frames");
    c_est->add_option("--input", est.inputs, "CSV file(s); shell patterns select frame sequences")->required();
    c_est->add_option("--half-width", est.half_width, "Window [-R, R]^d; default: bounding cube of the data")
        ->check(CLI::PositiveNumber);
    add_taper_options(*c_est, est.tapers);
    c_est->add_option("--jmin", est.jmin, "Smallest scale; default: knee of the diagnostic curve");
    c_est->add_option("--jmax", est.jmax, "Largest scale; default: taper support rule");
    c_est->add_option("--scales", est.scales, "Explicit list of scales (overrides --jmin/--jmax/--nscales)");
    c_est->add_option("--nscales", est.nscales, "Number of equispaced scales")->check(CLI::Range(2, 10000));
    c_est->add_option("--ci-level", est.ci_level, "Also compute a confidence interval at this level")
        ->check(CLI::Range(0.5, 0.9999));
    c_est->add_option("--ci-draws", est.ci_draws, "Monte Carlo draws for the interval")->check(CLI::Range(100, 10000000));
    c_est->add_flag("--ci-full", est.ci_full, "Use the full taper family and scale count for the interval");
    c_est->add_option("--seed", est.seed, "Seed for the interval and the Poisson reference");
    c_est->add_option("--output", est.output, "JSON report path (default stdout)");
    c_est->add_option("--curve-output", est.curve_output, "Write the diagnostic curve (mean over frames) as CSV");
    c_est->add_option("--poisson-reference", est.poisson_reference,
                      "Poisson replicates for the j_max cross-check and reference curve (0 = off)");

    SimulateOptions sim;
    auto* c_sim = app.add_subcommand("simulate", "Simulate a reference point process");
    add_sim_options(*c_sim, sim);
    c_sim->add_option("--output", sim.output, "CSV path (default stdout)");
    c_sim->add_option("--metadata", sim.metadata, "JSON metadata path (default <output>.json)");

    CurveOptions cur;
    auto* c_cur = app.add_subcommand("curve", "Diagnostic curve C(j) with an optional Poisson reference");
    c_cur->add_option("--input", cur.inputs, "CSV file(s); several frames give the mean curve")->required();
    c_cur->add_option("--half-width", cur.half_width, "Window [-R, R]^d")->check(CLI::PositiveNumber);
    add_taper_options(*c_cur, cur.tapers);
    c_cur->add_option("--grid-lo", cur.grid_lo, "Lower end of the scale grid");
    c_cur->add_option("--grid-hi", cur.grid_hi, "Upper end of the scale grid");
    c_cur->add_option("--grid-points", cur.grid_points, "Grid size")->check(CLI::Range(2, 100000));
    c_cur->add_option("--poisson-reference", cur.poisson_reference, "Poisson(1) replicates for the reference column");
    c_cur->add_option("--seed", cur.seed, "Seed for the reference");
    c_cur->add_option("--output", cur.output, "CSV path (default stdout)");

    CoverageOptions cov;
    cov.sim.model = "cloaked";
    cov.sim.alpha = 0.5;
    cov.sim.sigma = 0.15;
    auto* c_cov = app.add_subcommand("coverage", "Coverage of the confidence interval over simulated patterns");
    add_sim_options(*c_cov, cov.sim);
    c_cov->add_option("--true-alpha", cov.true_alpha, "Exponent the intervals should cover (default from the model)");
    c_cov->add_option("--replicates", cov.replicates, "Number of simulated patterns");
    add_taper_options(*c_cov, cov.tapers);
    c_cov->add_option("--ci-level", cov.ci_level, "Interval level");
    c_cov->add_option("--ci-draws", cov.ci_draws, "Monte Carlo draws per interval")->check(CLI::Range(100, 10000000));
    c_cov->add_flag("--ci-full", cov.ci_full, "Use the full taper family and scale count");
    c_cov->add_option("--output", cov.output, "JSON path (default stdout)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::Success& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return kExitParse;
    }

    try
    {
        if (c_est->parsed())
            return run_estimate(est);
        if (c_sim->parsed())
            return run_simulate(sim);
        if (c_cur->parsed())
            return run_curve(cur);
        if (c_cov->parsed())
            return run_coverage(cov);
    }
    catch (const EmptyInputPattern& e)
    {
        std::cerr << "hyperu: " << e.what() << '\n';
        return kExitEmpty;
    }
    catch (const EmptyPattern& e)
    {
        std::cerr << "hyperu: " << e.what() << '\n';
        return kExitEmpty;
    }
    catch (const ParseError& e)
    {
        std::cerr << "hyperu: " << e.what() << '\n';
        return kExitParse;
    }
    catch (const DomainError& e)
    {
        std::cerr << "hyperu: invalid argument: " << e.what() << '\n';
        return kExitParse;
    }
    catch (const InvalidPattern& e)
    {
        std::cerr << "hyperu: " << e.what() << '\n';
        return kExitParse;
    }
    catch (const Error& e)
    {
        std::cerr << "hyperu: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    catch (const std::exception& e)
    {
        std::cerr << "hyperu: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
