#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "estimator.hpp"
#include "geometry.hpp"
#include "inference.hpp"
#include "simulate.hpp"
#include "tapers.hpp"

namespace hyperu {

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;)
    {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s)
{
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        return std::nullopt;
    return v;
}

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/*! Reads `dim` comma-separated coordinates per line.
 *
 *  Blank lines and lines starting with '#' are skipped. A first data line
 *  made only of non-numeric fields is taken as a header. Anything else that
 *  does not parse raises ParseError naming the source and line.
 */
inline std::vector<double> read_points_csv(std::istream& in, int dim, const std::string& source = "<input>")
{
    if (dim < 1)
        throw DomainError("read_points_csv: dimension must be >= 1");
    std::vector<double> coords;
    std::string line;
    std::size_t line_no = 0;
    bool seen_data = false;
    while (std::getline(in, line))
    {
        ++line_no;
        const auto body = detail::trim(line);
        if (body.empty() || body.front() == '#')
            continue;
        const auto fields = detail::split_fields(body);
        std::vector<double> values;
        bool all_text = true;
        bool any_bad = false;
        for (auto f : fields)
        {
            const auto v = detail::parse_double(f);
            if (v)
            {
                all_text = false;
                values.push_back(*v);
            }
            else
            {
                any_bad = true;
            }
        }
        if (!seen_data && all_text)
        {
            seen_data = true; // header
            continue;
        }
        seen_data = true;
        if (any_bad)
            throw ParseError(source + ":" + std::to_string(line_no) + ": non-numeric field");
        if (static_cast<int>(values.size()) != dim)
            throw ParseError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                             " fields, found " + std::to_string(values.size()));
        for (double v : values)
            if (!std::isfinite(v))
                throw ParseError(source + ":" + std::to_string(line_no) + ": non-finite coordinate");
        coords.insert(coords.end(), values.begin(), values.end());
    }
    return coords;
}

/*! Pattern from a CSV file.
 *
 *  With a half-width, points outside [-R, R]^d are dropped (with a
 *  warning). Without one, the data are centred on their bounding box and
 *  observed through the tight bounding cube, also with a warning.
 */
inline PointPattern load_pattern(const std::string& path, int dim, std::optional<double> half_width = std::nullopt)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open " + path);
    auto coords = read_points_csv(in, dim, path);
    const std::size_t n = coords.size() / static_cast<std::size_t>(dim);

    if (half_width)
    {
        PointPattern p(dim, std::move(coords), Window(*half_width), OutsidePoints::clip);
        if (p.size() != n)
            warn(path + ": " + std::to_string(n - p.size()) + " points outside the window were dropped");
        return p;
    }
    if (n == 0)
        return PointPattern(dim, Window(1.0));

    double r = 0.0;
    for (int l = 0; l < dim; ++l)
    {
        double lo = coords[static_cast<std::size_t>(l)];
        double hi = lo;
        for (std::size_t k = 0; k < n; ++k)
        {
            const double v = coords[k * static_cast<std::size_t>(dim) + static_cast<std::size_t>(l)];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double mid = 0.5 * (lo + hi);
        for (std::size_t k = 0; k < n; ++k)
            coords[k * static_cast<std::size_t>(dim) + static_cast<std::size_t>(l)] -= mid;
        r = std::max(r, 0.5 * (hi - lo));
    }
    if (!(r > 0.0))
        r = 1.0;
    warn(path + ": no window given, using the bounding cube of half-width " + detail::format_double(r) +
         " (intensity may be overestimated)");
    return PointPattern(dim, std::move(coords), Window(r), OutsidePoints::clip);
}

inline void write_pattern_csv(std::ostream& out, const PointPattern& p)
{
    static const char* names[] = {"x", "y", "z"};
    for (int l = 0; l < p.dim(); ++l)
        out << (l ? "," : "") << (l < 3 ? names[l] : ("x" + std::to_string(l)).c_str());
    out << '\n';
    for (std::size_t k = 0; k < p.size(); ++k)
    {
        auto x = p.point(k);
        for (std::size_t l = 0; l < x.size(); ++l)
            out << (l ? "," : "") << detail::format_double(x[l]);
        out << '\n';
    }
}

/// Rows j,C(j)[,C_poisson(j)].
inline void write_curve_csv(std::ostream& out, const CurveC& curve, const CurveC* reference = nullptr)
{
    if (reference && reference->grid.size() != curve.grid.size())
        throw DomainError("write_curve_csv: reference curve uses a different grid");
    out << (reference ? "j,C,C_poisson\n" : "j,C\n");
    for (std::size_t k = 0; k < curve.grid.size(); ++k)
    {
        out << detail::format_double(curve.grid[k]) << ',' << detail::format_double(curve.values[k]);
        if (reference)
            out << ',' << detail::format_double(reference->values[k]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const TaperPreset& p)
{
    return {{"dim", p.dim}, {"i_max", p.i_max}, {"scale", p.scale}, {"eps", p.eps}};
}

inline TaperPreset taper_preset_from_json(const nlohmann::json& j)
{
    TaperPreset p;
    p.dim = j.value("dim", p.dim);
    p.i_max = j.value("i_max", p.i_max);
    p.scale = j.value("scale", p.scale);
    p.eps = j.value("eps", p.eps);
    return p;
}

inline nlohmann::json to_json(const SimSpec& s)
{
    return {{"variant", to_string(s.variant)}, {"lambda", s.lambda},         {"alpha", s.alpha}, {"sigma", s.sigma},
            {"radius", s.radius},             {"half_width", s.half_width}, {"seed", s.seed}};
}

inline SimSpec sim_spec_from_json(const nlohmann::json& j)
{
    SimSpec s;
    s.variant = sim_variant_from_string(j.at("variant").get<std::string>());
    s.lambda = j.value("lambda", s.lambda);
    s.alpha = j.value("alpha", s.alpha);
    s.sigma = j.value("sigma", s.sigma);
    s.radius = j.value("radius", s.radius);
    s.half_width = j.value("half_width", s.half_width);
    s.seed = j.value("seed", s.seed);
    return s;
}

inline nlohmann::json to_json(const ConfidenceInterval& ci)
{
    return {{"lo", ci.lo},       {"hi", ci.hi},         {"level", ci.level}, {"alpha_hat", ci.alpha_hat},
            {"beta", ci.beta},   {"nonempty", ci.nonempty}, {"draws", ci.draws}};
}

/// Report document; ci and config_echo are optional.
inline nlohmann::json report_to_json(const EstimateReport& r, const ConfidenceInterval* ci = nullptr,
                                     const std::string& curve_path = "", const nlohmann::json& config_echo = {})
{
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["alpha_hat"] = r.alpha_hat;
    j["nonempty"] = r.nonempty;
    j["ci"] = ci ? to_json(*ci) : nlohmann::json(nullptr);
    j["lambda_hat"] = r.lambda_hat;
    j["R"] = r.half_width;
    j["j_min"] = r.j_min;
    j["j_max"] = r.j_max;
    j["n_points"] = r.n_points;
    j["n_tapers"] = r.n_tapers;
    j["dim"] = r.dim;
    j["scales"] = r.plan.scales;
    j["weights"] = r.plan.weights;
    j["log_energy"] = r.log_energy;
    j["curve_path"] = curve_path.empty() ? nlohmann::json(nullptr) : nlohmann::json(curve_path);
    j["config_echo"] = config_echo;
    return j;
}

} // namespace hyperu
