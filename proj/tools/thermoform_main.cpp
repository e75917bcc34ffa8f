// thermoform: check, reconstruct and analyze homogeneous thermodynamic
// models given by intensive state equations.  See README for the model
// file format, the JSON schema and the exit code table.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "thermoform/analysis.hpp"
#include "thermoform/model_file.hpp"

using namespace thermoform;

namespace {

constexpr const char* kToolVersion = "thermoform 0.1.0";
constexpr int kSchemaVersion = 1;

constexpr int kExitPass = 0;
constexpr int kExitCheckFailure = 2;
constexpr int kExitInvalidInput = 3;
constexpr int kExitNumericFailure = 4;

// thrown for usage-level problems found after argument parsing
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// deterministic JSON: fixed field order, doubles at 17 significant digits

class Json {
  public:
    Json& begin_object() { return open('{', '}'); }
    Json& end_object() { return close('}'); }
    Json& begin_array() { return open('[', ']'); }
    Json& end_array() { return close(']'); }

    Json& key(const std::string& k) {
        comma();
        quote(k);
        out_ += ": ";
        pending_value_ = true;
        return *this;
    }
    Json& value(const std::string& s) {
        comma();
        quote(s);
        return *this;
    }
    Json& value(const char* s) { return value(std::string(s)); }
    Json& value(double d) {
        comma();
        if (!std::isfinite(d)) {
            out_ += "null";
        } else {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", d);
            out_ += buf;
        }
        return *this;
    }
    Json& value(bool b) {
        comma();
        out_ += b ? "true" : "false";
        return *this;
    }
    Json& value(std::uint64_t u) {
        comma();
        out_ += std::to_string(u);
        return *this;
    }
    Json& value(int i) {
        comma();
        out_ += std::to_string(i);
        return *this;
    }
    Json& value_null() {
        comma();
        out_ += "null";
        return *this;
    }

    std::string str() const { return out_ + "\n"; }

  private:
    std::string out_;
    std::vector<int> depth_counts_{0};
    bool pending_value_ = false;

    void comma() {
        if (pending_value_) {
            pending_value_ = false;
            return;
        }
        if (depth_counts_.back()++ > 0) out_ += ", ";
    }
    Json& open(char c, char) {
        comma();
        out_ += c;
        depth_counts_.push_back(0);
        return *this;
    }
    Json& close(char c) {
        depth_counts_.pop_back();
        out_ += c;
        return *this;
    }
    void quote(const std::string& s) {
        out_ += '"';
        for (char c : s) {
            switch (c) {
                case '"': out_ += "\\\""; break;
                case '\\': out_ += "\\\\"; break;
                case '\n': out_ += "\\n"; break;
                case '\t': out_ += "\\t"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof buf, "\\u%04x", c);
                        out_ += buf;
                    } else {
                        out_ += c;
                    }
            }
        }
        out_ += '"';
    }
};

// ---------------------------------------------------------------------------
// tolerances: defaults, then TF_TOLERANCES file, then flags

struct Tolerances {
    double homogeneity = 1e-8;
    double integrability = 1e-8;
    double exactness = 1e-8;
    double quadrature_rel = 1e-11;
    double quadrature_abs = 1e-14;

    QuadratureSettings quadrature() const {
        QuadratureSettings q;
        q.rel_tol = quadrature_rel;
        q.abs_tol = quadrature_abs;
        return q;
    }
};

void load_tolerances_file(Tolerances& tol, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("TF_TOLERANCES: cannot open '" + path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        std::size_t eq = line.find('=');
        auto where = [&] { return path + ":" + std::to_string(line_no); };
        if (eq == std::string::npos) throw UsageError(where() + ": expected 'name = value'");
        std::stringstream key_ss(line.substr(0, eq));
        std::string key;
        key_ss >> key;
        char* end = nullptr;
        std::string vtext = line.substr(eq + 1);
        double v = std::strtod(vtext.c_str(), &end);
        while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
        if (!end || *end != '\0' || !(v > 0.0))
            throw UsageError(where() + ": value of '" + key + "' must be a positive number");
        if (key == "homogeneity") tol.homogeneity = v;
        else if (key == "integrability") tol.integrability = v;
        else if (key == "exactness") tol.exactness = v;
        else if (key == "quadrature_rel") tol.quadrature_rel = v;
        else if (key == "quadrature_abs") tol.quadrature_abs = v;
        else throw UsageError(where() + ": unknown tolerance '" + key + "'");
    }
}

// ---------------------------------------------------------------------------
// small helpers

std::string describe(const std::vector<std::string>& names, const StatePoint& x) {
    std::string out = "(";
    for (std::size_t i = 0; i < x.size(); ++i) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.10g", x[i]);
        if (i) out += ", ";
        out += names[i] + "=" + buf;
    }
    return out + ")";
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// splitmix64: portable deterministic sampling, independent of libstdc++
struct SplitMix {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

// interior points with coordinates at reference * exp(u), |u| <= ln 3
std::vector<StatePoint> sample_interior(const ThermoModel& model, std::size_t count,
                                        std::uint64_t seed) {
    SplitMix rng{seed};
    std::vector<StatePoint> out;
    int attempts = 0;
    while (out.size() < count && attempts < 10000) {
        ++attempts;
        StatePoint x = model.reference;
        for (std::size_t c = 0; c < x.size(); ++c)
            x[c] *= std::exp((2.0 * rng.uniform() - 1.0) * std::log(3.0));
        if (model.interior(x)) out.push_back(std::move(x));
    }
    if (out.size() < count)
        throw NumericError("could not sample enough interior points near the reference");
    return out;
}

StatePoint parse_point(const ThermoModel& model, const std::string& text,
                       const std::string& flag) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        double v = std::strtod(item.c_str(), &end);
        while (end && (*end == ' ' || *end == '\t')) ++end;
        if (end == item.c_str() || *end != '\0')
            throw UsageError(flag + ": '" + item + "' is not a number");
        vals.push_back(v);
    }
    if (vals.size() != model.dimension())
        throw UsageError(flag + ": expected " + std::to_string(model.dimension()) +
                         " comma-separated values for " + model.name);
    return StatePoint(vals);
}

// ---------------------------------------------------------------------------
// the check pipeline (homogeneity, integrability, exactness of omega/f)

struct CheckResult {
    std::string name;
    bool passed = false;
    double worst = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct CheckOutcome {
    std::vector<CheckResult> checks;
    bool passed = true;
};

CheckOutcome run_checks(const ThermoModel& model, const Tolerances& tol, std::uint64_t seed) {
    CheckOutcome out;
    PfaffianForm omega = build_heat_form(model);
    std::vector<StatePoint> samples = sample_interior(model, 12, seed);
    auto interior = [&](const StatePoint& x) { return model.interior(x); };

    {
        DegreeReport report =
            check_homogeneity(omega, samples, {0.5, 2.0, 3.0}, tol.homogeneity, interior);
        CheckResult r;
        r.name = "homogeneity";
        r.passed = report.pass;
        r.worst = report.worst_rel_deviation;
        r.tolerance = tol.homogeneity;
        r.detail = "heat-form coefficients vs degree 0 at " +
                   std::to_string(samples.size()) + " points, lambda in {0.5, 2, 3}";
        if (report.untestable > 0)
            r.detail += " (" + std::to_string(report.untestable) + " scaled samples untestable)";
        out.checks.push_back(std::move(r));
    }

    {
        CheckResult r;
        r.name = "integrability";
        r.tolerance = tol.integrability;
        if (model.dimension() == 2) {
            r.passed = true;
            r.worst = 0.0;
            r.detail = "two coordinates: no Frobenius triples, integrable outright";
        } else {
            double worst = 0.0;
            TripleResidual worst_triple{};
            StatePoint worst_point;
            std::string failures;
            int failure_count = 0;
            for (const StatePoint& x : samples) {
                for (const TripleResidual& t : integrability_residuals(omega, x)) {
                    if (std::fabs(t.normalized) >= std::fabs(worst)) {
                        worst = t.normalized;
                        worst_triple = t;
                        worst_point = x;
                    }
                    if (std::fabs(t.normalized) > tol.integrability && failure_count < 3) {
                        ++failure_count;
                        failures += "\n    l(" + model.coordinates[t.i] + "," +
                                    model.coordinates[t.j] + "," + model.coordinates[t.k] +
                                    ") = " + fmt("%.9g", t.raw) + " at " +
                                    describe(model.coordinates, x);
                    }
                }
            }
            r.worst = std::fabs(worst);
            r.passed = r.worst <= tol.integrability;
            r.detail = "worst |l(" + model.coordinates[worst_triple.i] + "," +
                       model.coordinates[worst_triple.j] + "," +
                       model.coordinates[worst_triple.k] + ")| normalized at " +
                       describe(model.coordinates, worst_point) + failures;
        }
        out.checks.push_back(std::move(r));
    }

    {
        CheckResult r;
        r.name = "exactness";
        r.tolerance = tol.exactness;
        PfaffianForm scaled = over_radial(omega);
        double worst = 0.0;
        std::size_t wi = 0, wj = 1;
        StatePoint worst_point = samples.front();
        for (const StatePoint& x : samples) {
            for (const PairResidual& p : exactness_residuals(scaled, x)) {
                if (std::fabs(p.normalized) >= worst) {
                    worst = std::fabs(p.normalized);
                    wi = p.i;
                    wj = p.j;
                    worst_point = x;
                }
            }
        }
        r.worst = worst;
        r.passed = worst <= tol.exactness;
        r.detail = "omega/f curl residuals; worst on (" + model.coordinates[wi] + "," +
                   model.coordinates[wj] + ") at " + describe(model.coordinates, worst_point);
        out.checks.push_back(std::move(r));
    }

    for (const CheckResult& r : out.checks) out.passed = out.passed && r.passed;
    return out;
}

// fixed header fields shared by every JSON report
void json_header(Json& j, const char* command, const LoadedModel& lm, std::uint64_t seed,
                 const Tolerances& tol) {
    j.key("schema_version").value(kSchemaVersion);
    j.key("tool").value(kToolVersion);
    j.key("command").value(command);
    j.key("model").value(lm.model.name);
    j.key("digest").value(lm.digest);
    j.key("seed").value(seed);
    j.key("tolerances").begin_object();
    j.key("homogeneity").value(tol.homogeneity);
    j.key("integrability").value(tol.integrability);
    j.key("exactness").value(tol.exactness);
    j.key("quadrature_rel").value(tol.quadrature_rel);
    j.key("quadrature_abs").value(tol.quadrature_abs);
    j.end_object();
}

void json_checks(Json& j, const CheckOutcome& outcome) {
    j.key("checks").begin_array();
    for (const CheckResult& r : outcome.checks) {
        j.begin_object();
        j.key("name").value(r.name);
        j.key("passed").value(r.passed);
        j.key("worst").value(r.worst);
        j.key("tolerance").value(r.tolerance);
        j.key("detail").value(r.detail);
        j.end_object();
    }
    j.end_array();
    j.key("passed").value(outcome.passed);
}

void print_checks_text(const LoadedModel& lm, const CheckOutcome& outcome) {
    std::printf("model %s (digest %s)\n", lm.model.name.c_str(), lm.digest.c_str());
    for (const CheckResult& r : outcome.checks) {
        std::printf("  %-13s %s  worst %.6g (tolerance %.3g)\n", r.name.c_str(),
                    r.passed ? "PASS" : "FAIL", r.worst, r.tolerance);
        std::printf("    %s\n", r.detail.c_str());
    }
    std::printf("RESULT: %s\n", outcome.passed ? "PASS" : "FAIL");
}

// ---------------------------------------------------------------------------
// grid parsing and parallel reconstruction

struct GridAxis {
    std::string name;
    std::vector<double> values;
};

std::vector<GridAxis> parse_grid(const ThermoModel& model, const std::string& spec) {
    std::vector<GridAxis> axes;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        std::size_t eq = part.find('=');
        if (eq == std::string::npos)
            throw UsageError("--grid: expected 'name=value' or 'name=lo:hi:n', got '" + part +
                             "'");
        GridAxis axis;
        axis.name = part.substr(0, eq);
        std::string rest = part.substr(eq + 1);
        std::vector<std::string> pieces;
        std::stringstream rs(rest);
        std::string piece;
        while (std::getline(rs, piece, ':')) pieces.push_back(piece);
        auto num = [&](const std::string& s) {
            char* end = nullptr;
            double v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0')
                throw UsageError("--grid: '" + s + "' is not a number");
            return v;
        };
        if (pieces.size() == 1) {
            axis.values.push_back(num(pieces[0]));
        } else if (pieces.size() == 3) {
            double lo = num(pieces[0]), hi = num(pieces[1]);
            double nd = num(pieces[2]);
            int n = static_cast<int>(nd);
            if (nd != n || n < 2)
                throw UsageError("--grid: point count in '" + part +
                                 "' must be an integer >= 2");
            for (int i = 0; i < n; ++i)
                axis.values.push_back(lo + (hi - lo) * i / (n - 1));
        } else {
            throw UsageError("--grid: expected 'name=value' or 'name=lo:hi:n', got '" + part +
                             "'");
        }
        axes.push_back(std::move(axis));
    }
    // reorder to the model's coordinate order; every coordinate exactly once
    std::vector<GridAxis> ordered;
    for (const std::string& c : model.coordinates) {
        bool found = false;
        for (GridAxis& a : axes) {
            if (a.name != c) continue;
            if (found) throw UsageError("--grid: coordinate " + c + " given twice");
            ordered.push_back(std::move(a));
            found = true;
        }
        if (!found) throw UsageError("--grid: missing coordinate " + c);
    }
    if (ordered.size() != axes.size())
        throw UsageError("--grid: has a coordinate that is not in the model");
    return ordered;
}

struct GridPoint {
    StatePoint state;
    bool ok = false;
    double entropy = 0.0;
    double temperature = 0.0;
    double err_estimate = 0.0;
    double analytic_delta = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

std::vector<GridPoint> evaluate_grid(const EntropyField& field,
                                     const std::vector<GridAxis>& axes) {
    const ThermoModel& model = field.model();
    std::size_t m = axes.size();
    std::size_t total = 1;
    for (const GridAxis& a : axes) total *= a.values.size();

    std::vector<GridPoint> points(total);
    // row-major over model coordinate order, last coordinate fastest
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        StatePoint x;
        x.coords.resize(m);
        for (std::size_t c = m; c-- > 0;) {
            x[c] = axes[c].values[rem % axes[c].values.size()];
            rem /= axes[c].values.size();
        }
        points[flat].state = std::move(x);
    }

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            GridPoint& gp = points[i];
            try {
                EntropyValue v = field.evaluate(gp.state);
                gp.ok = true;
                gp.entropy = v.entropy;
                gp.temperature = v.temperature;
                gp.err_estimate = v.error_estimate;
                if (model.analytic_entropy) {
                    expr::Binding b = model.binding_at(gp.state);
                    gp.analytic_delta = v.entropy - expr::evaluate(model.analytic_entropy, b);
                }
            } catch (const std::exception& e) {
                gp.error = e.what();
            }
        }
    };

    std::size_t workers = std::max<std::size_t>(
        1, std::min<std::size_t>({std::thread::hardware_concurrency(), 8, total}));
    if (workers == 1) {
        work(0, total);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (total + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(work, std::min(w * chunk, total),
                              std::min((w + 1) * chunk, total));
        for (std::thread& t : pool) t.join();
    }
    return points;
}

// ---------------------------------------------------------------------------
// commands

struct Common {
    std::string model_path;
    bool json = false;
    std::uint64_t seed = 20260816ull;
    Tolerances tol;
    CLI::App* cmd = nullptr;  // for asking which flags were actually given
};

void add_common(CLI::App* cmd, Common& c) {
    c.cmd = cmd;
    cmd->add_option("model", c.model_path, "model file")->required();
    cmd->add_flag("--json", c.json, "emit a JSON report instead of text");
    cmd->add_option("--seed", c.seed, "seed for sampled check grids");
    cmd->add_option("--tol-homogeneity", c.tol.homogeneity, "relative homogeneity tolerance");
    cmd->add_option("--tol-integrability", c.tol.integrability,
                    "normalized Frobenius residual tolerance");
    cmd->add_option("--tol-exactness", c.tol.exactness, "normalized curl residual tolerance");
    cmd->add_option("--tol-quadrature", c.tol.quadrature_rel, "relative quadrature tolerance");
}

int cmd_check(const Common& c) {
    LoadedModel lm = load_model_file(c.model_path);
    CheckOutcome outcome = run_checks(lm.model, c.tol, c.seed);
    if (c.json) {
        Json j;
        j.begin_object();
        json_header(j, "check", lm, c.seed, c.tol);
        json_checks(j, outcome);
        j.end_object();
        std::fputs(j.str().c_str(), stdout);
    } else {
        print_checks_text(lm, outcome);
    }
    return outcome.passed ? kExitPass : kExitCheckFailure;
}

int cmd_reconstruct(const Common& c, const std::string& grid_spec, const std::string& out_path,
                    const std::string& format, bool force) {
    if (format != "csv" && format != "json")
        throw UsageError("--format must be csv or json");
    LoadedModel lm = load_model_file(c.model_path);
    if (!force) {
        CheckOutcome outcome = run_checks(lm.model, c.tol, c.seed);
        if (!outcome.passed) {
            std::fprintf(stderr,
                         "%s: model failed verification; rerun with --force to override:\n",
                         c.model_path.c_str());
            for (const CheckResult& r : outcome.checks)
                if (!r.passed)
                    std::fprintf(stderr, "  %s FAIL worst %.6g: %s\n", r.name.c_str(), r.worst,
                                 r.detail.c_str());
            return kExitCheckFailure;
        }
    }

    std::vector<GridAxis> axes = parse_grid(lm.model, grid_spec);
    EntropyField field(lm.model, c.tol.quadrature());
    std::vector<GridPoint> points = evaluate_grid(field, axes);
    std::size_t failed = 0;
    for (const GridPoint& gp : points)
        if (!gp.ok) ++failed;

    std::ostringstream body;
    bool with_delta = lm.model.analytic_entropy != nullptr;
    if (format == "csv") {
        for (const std::string& name : lm.model.coordinates) body << name << ",";
        body << "S,T,err_estimate,analytic_delta\n";
        char buf[40];
        for (const GridPoint& gp : points) {
            for (double v : gp.state.coords) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                body << buf << ",";
            }
            if (gp.ok) {
                std::snprintf(buf, sizeof buf, "%.17g", gp.entropy);
                body << buf << ",";
                std::snprintf(buf, sizeof buf, "%.17g", gp.temperature);
                body << buf << ",";
                std::snprintf(buf, sizeof buf, "%.17g", gp.err_estimate);
                body << buf << ",";
                if (with_delta) {
                    std::snprintf(buf, sizeof buf, "%.17g", gp.analytic_delta);
                    body << buf;
                }
            } else {
                body << "nan,nan,nan,";  // failed point marker
                if (with_delta) body << "nan";
            }
            body << "\n";
        }
    } else {
        Json j;
        j.begin_object();
        json_header(j, "reconstruct", lm, c.seed, c.tol);
        j.key("grid").begin_object();
        for (const GridAxis& a : axes) {
            j.key(a.name).begin_array();
            for (double v : a.values) j.value(v);
            j.end_array();
        }
        j.end_object();
        j.key("points").begin_array();
        for (const GridPoint& gp : points) {
            j.begin_object();
            j.key("state").begin_array();
            for (double v : gp.state.coords) j.value(v);
            j.end_array();
            if (gp.ok) {
                j.key("S").value(gp.entropy);
                j.key("T").value(gp.temperature);
                j.key("err_estimate").value(gp.err_estimate);
                j.key("analytic_delta");
                if (with_delta) j.value(gp.analytic_delta);
                else j.value_null();
            } else {
                j.key("error").value(gp.error);
            }
            j.end_object();
        }
        j.end_array();
        j.key("total_points").value(static_cast<int>(points.size()));
        j.key("failed_points").value(static_cast<int>(failed));
        j.end_object();
        body << j.str();
    }

    if (out_path.empty()) {
        std::fputs(body.str().c_str(), stdout);
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw UsageError("--out: cannot open '" + out_path + "' for writing");
        out << body.str();
    }
    if (failed > 0)
        std::fprintf(stderr, "%zu of %zu grid points failed\n", failed, points.size());
    return 10 * failed > points.size() ? kExitCheckFailure : kExitPass;
}

const char* verdict_name(ConcavityVerdict v) {
    switch (v) {
        case ConcavityVerdict::Concave: return "concave";
        case ConcavityVerdict::NotConcave: return "not-concave";
        default: return "marginal";
    }
}

int cmd_hessian(const Common& c, const std::string& at_text) {
    LoadedModel lm = load_model_file(c.model_path);
    StatePoint at = parse_point(lm.model, at_text, "--at");
    EntropyField field(lm.model, c.tol.quadrature());  // throws if not integrable
    HessianReport h = entropy_hessian(field, at);
    bool closed_form = lm.model.dimension() == 3;
    ConcavityConditions cc;
    if (closed_form) cc = concavity_conditions(field, at);

    if (c.json) {
        Json j;
        j.begin_object();
        json_header(j, "hessian", lm, c.seed, c.tol);
        j.key("at").begin_array();
        for (double v : at.coords) j.value(v);
        j.end_array();
        j.key("gradient").begin_array();
        for (double v : h.gradient) j.value(v);
        j.end_array();
        j.key("hessian").begin_array();
        for (Eigen::Index r = 0; r < h.hessian.rows(); ++r) {
            j.begin_array();
            for (Eigen::Index col = 0; col < h.hessian.cols(); ++col)
                j.value(h.hessian(r, col));
            j.end_array();
        }
        j.end_array();
        j.key("minors").begin_array();
        for (double v : h.minors) j.value(v);
        j.end_array();
        j.key("determinant").value(h.determinant);
        j.key("radial_form").value(h.radial_form);
        j.key("symmetry_defect").value(h.symmetry_defect);
        j.key("fd_max_deviation").value(h.fd_max_deviation);
        j.key("fd_agrees").value(h.fd_agrees);
        j.key("verdict").value(verdict_name(h.verdict));
        if (closed_form) {
            j.key("closed_form").begin_object();
            j.key("c1").value(cc.c1);
            j.key("c2").value(cc.c2);
            j.key("satisfied").value(cc.satisfied);
            j.key("note").value(cc.note);
            j.end_object();
        }
        j.end_object();
        std::fputs(j.str().c_str(), stdout);
    } else {
        std::printf("Hessian of S for %s at %s\n", lm.model.name.c_str(),
                    describe(lm.model.coordinates, at).c_str());
        for (Eigen::Index r = 0; r < h.hessian.rows(); ++r) {
            std::printf("  [");
            for (Eigen::Index col = 0; col < h.hessian.cols(); ++col)
                std::printf(" %13.6g", h.hessian(r, col));
            std::printf(" ]\n");
        }
        std::printf("leading principal minors:");
        for (std::size_t k = 0; k < h.minors.size(); ++k)
            std::printf(" m%zu = %.6g", k + 1, h.minors[k]);
        std::printf("\ndeterminant %.6g, radial form %.6g (both ~ 0 for degree-1 S)\n",
                    h.determinant, h.radial_form);
        std::printf("finite differences agree to %.3g (%s)\n", h.fd_max_deviation,
                    h.fd_agrees ? "ok" : "MISMATCH");
        if (closed_form)
            std::printf("closed form: c1 = %.6g (< 0), c2 = %.6g (> 0): %s\n", cc.c1, cc.c2,
                        cc.satisfied ? "satisfied" : "violated");
        std::printf("verdict: %s\n", verdict_name(h.verdict));
    }
    return h.verdict == ConcavityVerdict::NotConcave ? kExitCheckFailure : kExitPass;
}

const char* third_law_name(ThirdLawClass c) {
    switch (c) {
        case ThirdLawClass::PlanckCompliant: return "planck-compliant";
        case ThirdLawClass::PlanckViolating: return "planck-violating";
        case ThirdLawClass::PositivityViolating: return "positivity-violating";
        default: return "inconclusive";
    }
}

int cmd_third_law(const Common& c, const std::string& ray_text, double eps_boundary) {
    LoadedModel lm = load_model_file(c.model_path);
    StatePoint start = ray_text.empty() ? lm.model.reference
                                        : parse_point(lm.model, ray_text, "--ray");
    PathSpec approach = boundary_approach(lm.model, start, eps_boundary);
    EntropyField field(lm.model, c.tol.quadrature());
    ThirdLawReport report = third_law_classify(field, approach, eps_boundary);

    if (c.json) {
        Json j;
        j.begin_object();
        json_header(j, "third-law", lm, c.seed, c.tol);
        j.key("ray_start").begin_array();
        for (double v : start.coords) j.value(v);
        j.end_array();
        j.key("eps_boundary").value(eps_boundary);
        j.key("samples").begin_array();
        for (const ThirdLawSample& s : report.samples) {
            j.begin_object();
            j.key("B").value(s.b);
            j.key("hat_s").value(s.hat_s);
            j.end_object();
        }
        j.end_array();
        j.key("slope").value(report.slope);
        j.key("interior_zeros").begin_array();
        for (const StatePoint& z : report.interior_zeros) {
            j.begin_array();
            for (double v : z.coords) j.value(v);
            j.end_array();
        }
        j.end_array();
        j.key("classification").value(third_law_name(report.classification));
        j.key("evidence").value(report.evidence);
        j.end_object();
        std::fputs(j.str().c_str(), stdout);
    } else {
        std::printf("third-law triage for %s from %s\n", lm.model.name.c_str(),
                    describe(lm.model.coordinates, start).c_str());
        for (const ThirdLawSample& s : report.samples)
            std::printf("  B = %-8.3g hat S = %.9g\n", s.b, s.hat_s);
        if (std::isfinite(report.slope))
            std::printf("slope of hat S vs ln B over the last two decades: %.6g\n",
                        report.slope);
        std::printf("classification: %s\n  %s\n", third_law_name(report.classification),
                    report.evidence.c_str());
    }
    return kExitPass;
}

int cmd_leaf(const Common& c, double s_value, const std::string& params_text) {
    LoadedModel lm = load_model_file(c.model_path);
    if (!(s_value > 0.0)) throw UsageError("--s-value: the entropy level must be positive");
    std::vector<double> params;
    if (!params_text.empty()) {
        std::stringstream ss(params_text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            char* end = nullptr;
            double v = std::strtod(item.c_str(), &end);
            if (end == item.c_str() || *end != '\0')
                throw UsageError("--params: '" + item + "' is not a number");
            params.push_back(v);
        }
    }
    if (params.size() != lm.model.dimension() - 1)
        throw UsageError("--params: expected " + std::to_string(lm.model.dimension() - 1) +
                         " values (all coordinates except the energy)");

    EntropyField field(lm.model, c.tol.quadrature());
    LeafResult leaf = leaf_solve(field, s_value, params);

    if (c.json) {
        Json j;
        j.begin_object();
        json_header(j, "leaf", lm, c.seed, c.tol);
        j.key("s_value").value(s_value);
        j.key("params").begin_array();
        for (double v : params) j.value(v);
        j.end_array();
        j.key("B_c").value(leaf.b_c);
        j.key("state").begin_array();
        for (double v : leaf.state.coords) j.value(v);
        j.end_array();
        j.key("entropy").value(leaf.entropy);
        j.key("residual").value(leaf.residual);
        j.key("iterations").value(leaf.iterations);
        j.end_object();
        std::fputs(j.str().c_str(), stdout);
    } else {
        std::printf("B_c = %.9g (full precision %.17g)\n", leaf.b_c, leaf.b_c);
        std::printf("state %s, S = %.12g, residual %.3g after %d bisection steps\n",
                    describe(lm.model.coordinates, leaf.state).c_str(), leaf.entropy,
                    leaf.residual, leaf.iterations);
    }
    return kExitPass;
}

int cmd_gibbs_duhem(const Common& c, const std::string& from_text, const std::string& to_text) {
    LoadedModel lm = load_model_file(c.model_path);
    PathSpec path;
    path.waypoints = {parse_point(lm.model, from_text, "--from"),
                      parse_point(lm.model, to_text, "--to")};
    LineIntegralResult r = gibbs_duhem_reconstruct(lm.model, path, c.tol.quadrature());

    if (c.json) {
        Json j;
        j.begin_object();
        json_header(j, "gibbs-duhem", lm, c.seed, c.tol);
        j.key("from").begin_array();
        for (double v : path.waypoints.front().coords) j.value(v);
        j.end_array();
        j.key("to").begin_array();
        for (double v : path.waypoints.back().coords) j.value(v);
        j.end_array();
        j.key("delta_log_inv_T").value(r.value);
        j.key("err_estimate").value(r.error_estimate);
        j.end_object();
        std::fputs(j.str().c_str(), stdout);
    } else {
        std::printf("delta log(1/T) from %s to %s = %.9g (error estimate %.3g)\n",
                    describe(lm.model.coordinates, path.waypoints.front()).c_str(),
                    describe(lm.model.coordinates, path.waypoints.back()).c_str(), r.value,
                    r.error_estimate);
    }
    return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"verify, reconstruct and analyze entropies of homogeneous thermodynamic "
                 "models"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    Common check_c, rec_c, hes_c, third_c, leaf_c, gd_c;

    CLI::App* check = app.add_subcommand("check",
                                         "homogeneity, integrability and exactness checks");
    add_common(check, check_c);

    CLI::App* rec = app.add_subcommand("reconstruct", "tabulate S and T on a grid");
    add_common(rec, rec_c);
    std::string grid_spec, out_path, format = "csv";
    bool force = false;
    rec->add_option("--grid", grid_spec, "grid spec, e.g. \"U=1:16:4,V=1\"")->required();
    rec->add_option("--out", out_path, "output file (default stdout)");
    rec->add_option("--format", format, "csv or json (default csv)");
    rec->add_flag("--force", force, "skip the verification gate");

    CLI::App* hes = app.add_subcommand("hessian", "entropy Hessian and concavity at a point");
    add_common(hes, hes_c);
    std::string at_text;
    hes->add_option("--at", at_text, "state, e.g. \"1,1\"")->required();

    CLI::App* third = app.add_subcommand("third-law", "triage the T -> 0 behaviour");
    add_common(third, third_c);
    std::string ray_text;
    double eps_boundary = 1e-8;
    third->add_option("--ray", ray_text, "march start state (default: the reference)");
    third->add_option("--eps-boundary", eps_boundary, "final boundary offset of the march");

    CLI::App* leaf = app.add_subcommand("leaf", "solve S(U, params) = c for the energy");
    add_common(leaf, leaf_c);
    double s_value = 0.0;
    std::string params_text;
    leaf->add_option("--s-value", s_value, "entropy level c > 0")->required();
    leaf->add_option("--params", params_text, "fixed non-energy coordinates, e.g. \"1\"");

    CLI::App* gd = app.add_subcommand("gibbs-duhem", "integrate d log(1/T) between states");
    add_common(gd, gd_c);
    std::string from_text, to_text;
    gd->add_option("--from", from_text, "start state")->required();
    gd->add_option("--to", to_text, "end state")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        Common* active = nullptr;
        if (app.got_subcommand(check)) active = &check_c;
        else if (app.got_subcommand(rec)) active = &rec_c;
        else if (app.got_subcommand(hes)) active = &hes_c;
        else if (app.got_subcommand(third)) active = &third_c;
        else if (app.got_subcommand(leaf)) active = &leaf_c;
        else active = &gd_c;
        if (const char* tf = std::getenv("TF_TOLERANCES")) {
            Tolerances from_file;  // flags win over the file, file over defaults
            load_tolerances_file(from_file, tf);
            auto given = [&](const char* flag) { return active->cmd->count(flag) > 0; };
            if (!given("--tol-homogeneity")) active->tol.homogeneity = from_file.homogeneity;
            if (!given("--tol-integrability"))
                active->tol.integrability = from_file.integrability;
            if (!given("--tol-exactness")) active->tol.exactness = from_file.exactness;
            if (!given("--tol-quadrature"))
                active->tol.quadrature_rel = from_file.quadrature_rel;
            active->tol.quadrature_abs = from_file.quadrature_abs;  // no flag for this one
        }

        if (app.got_subcommand(check)) return cmd_check(check_c);
        if (app.got_subcommand(rec))
            return cmd_reconstruct(rec_c, grid_spec, out_path, format, force);
        if (app.got_subcommand(hes)) return cmd_hessian(hes_c, at_text);
        if (app.got_subcommand(third)) return cmd_third_law(third_c, ray_text, eps_boundary);
        if (app.got_subcommand(leaf)) return cmd_leaf(leaf_c, s_value, params_text);
        return cmd_gibbs_duhem(gd_c, from_text, to_text);
    } catch (const ModelFileError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitInvalidInput;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitInvalidInput;
    } catch (const NotIntegrableError& e) {
        std::fprintf(stderr, "refused: %s\n", e.what());
        return kExitCheckFailure;
    } catch (const NotExactError& e) {
        std::fprintf(stderr, "refused: %s\n", e.what());
        return kExitCheckFailure;
    } catch (const LeafRangeError& e) {
        std::fprintf(stderr, "no solution: %s\n", e.what());
        return kExitCheckFailure;
    } catch (const PathError& e) {
        std::fprintf(stderr, "invalid path: %s\n", e.what());
        return kExitInvalidInput;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kExitInvalidInput;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumericFailure;
    } catch (const ModelError& e) {
        std::fprintf(stderr, "invalid model: %s\n", e.what());
        return kExitInvalidInput;
    }
}
