#include "difflab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "difflab/classify.hpp"
#include "difflab/errors.hpp"
#include "difflab/laplace.hpp"
#include "difflab/mc.hpp"
#include "difflab/model.hpp"
#include "difflab/potential.hpp"
#include "difflab/scale_speed.hpp"

#ifndef DIFFLAB_VERSION
#define DIFFLAB_VERSION "0.0.0"
#endif

namespace difflab::cli {

const char* version() noexcept { return DIFFLAB_VERSION; }

namespace {

using json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Inputs {
    std::string model;
    std::optional<double> ref_point, alpha, x, y, a, b, t, tol_rel, tol_abs, dt, horizon;
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::string out;
    std::string format = "json";
    std::string profile;
    std::string dump;
    bool dump_requested = false;
    std::size_t dump_cap = 1000;
};

/// Command output: JSON result, optional CSV rendering and table lines for stderr.
struct Outcome {
    json result = json::object();
    std::string csv;
    std::vector<std::string> table;
    int code = Ok;
    bool stdout_taken = false;
};

json num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

std::string fmt(double v, int digits = 6) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

std::string exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
T need(const std::optional<T>& v, const char* flag) {
    if (!v) throw UsageError(std::string("missing required option ") + flag);
    return *v;
}

std::string timestamp() {
    std::time_t t = 0;
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(env, &end, 10);
        if (end == env || *end != '\0') throw UsageError("SOURCE_DATE_EPOCH must be an integer");
        t = static_cast<std::time_t>(v);
    } else {
        t = std::time(nullptr);
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

DiffusionSpec resolve_model(const std::string& ref) {
    if (ref.empty()) throw UsageError("a model is required (catalog name or file path)");
    DiffusionSpec spec = std::filesystem::is_regular_file(ref) ? load_model(ref) : catalog_lookup(ref);
    const auto problems = validate(spec);
    if (!problems.empty()) {
        std::string msg = "model " + spec.label() + " is invalid:";
        const std::size_t shown = std::min<std::size_t>(problems.size(), 5);
        for (std::size_t i = 0; i < shown; ++i) msg += "\n  " + problems[i];
        if (problems.size() > shown) msg += "\n  ... and " + std::to_string(problems.size() - shown) + " more";
        throw UsageError(msg);
    }
    return spec;
}

quad::Tolerance tolerance(const Inputs& in, quad::Tolerance base) {
    if (in.tol_rel) base.rel = *in.tol_rel;
    if (in.tol_abs) base.abs = *in.tol_abs;
    if (!(base.rel >= 0.0) || !(base.abs >= 0.0)) throw UsageError("tolerances must be non-negative");
    return base;
}

json tol_json(const quad::Tolerance& t) { return json{{"rel", t.rel}, {"abs", t.abs}}; }

json domain_json(const Interval& d) {
    return json{{"left", num(d.left())}, {"right", num(d.right())}, {"left_closed", d.left_closed()},
                {"right_closed", d.right_closed()}};
}

json verdict_json(const quad::Verdict& v) {
    return json{{"outcome", quad::to_string(v.outcome)}, {"value", num(v.value)}, {"error", num(v.error)},
                {"reason", v.reason}};
}

json boundary_json(const BoundaryClass& b) {
    return json{{"endpoint", num(b.endpoint)},
                {"kind", to_string(b.kind)},
                {"subtype", b.subtype ? json(to_string(*b.subtype)) : json(nullptr)},
                {"atom", b.atom ? num(b.atom->value()) : json(nullptr)},
                {"atom_defaulted", b.atom_defaulted},
                {"closed", b.closed()},
                {"u", verdict_json(b.u)},
                {"v", verdict_json(b.v)}};
}

std::string boundary_line(const char* label, const BoundaryClass& b) {
    std::string s = std::string(label) + "  " + fmt(b.endpoint) + "  " + to_string(b.kind);
    if (b.subtype) s += " (" + std::string(to_string(*b.subtype)) + ")";
    return s;
}

bool inconclusive(const AnalysisReport& r) {
    return r.left.kind == Kind::Inconclusive || r.right.kind == Kind::Inconclusive ||
           r.properties.fd == Answer::Inconclusive || r.properties.martingale == Answer::Inconclusive;
}

Outcome cmd_classify(const Inputs& in, json& params, json& tols) {
    const DiffusionSpec spec = resolve_model(in.model);
    ClassifyOptions opt;
    opt.tol = tolerance(in, opt.tol);
    opt.reference_point = in.ref_point;
    tols = tol_json(opt.tol);
    params["ref_point"] = in.ref_point ? json(*in.ref_point) : json(nullptr);
    const AnalysisReport r = analyze(spec, opt);

    Outcome o;
    o.result = json{{"model", r.model},
                    {"domain", domain_json(r.domain)},
                    {"reference_point", num(r.reference_point)},
                    {"grid_size", r.grid_size},
                    {"boundaries", {{"left", boundary_json(r.left)}, {"right", boundary_json(r.right)}}},
                    {"properties",
                     {{"fd", to_string(r.properties.fd)},
                      {"martingale", to_string(r.properties.martingale)},
                      {"rationale", r.properties.rationale}}},
                    {"diagnostics", r.diagnostics},
                    {"catalog_matches", r.catalog_matches}};
    o.csv = "model,left_kind,left_subtype,right_kind,right_subtype,fd,martingale\n" + r.model + "," +
            to_string(r.left.kind) + "," + (r.left.subtype ? to_string(*r.left.subtype) : "") + "," +
            to_string(r.right.kind) + "," + (r.right.subtype ? to_string(*r.right.subtype) : "") + "," +
            to_string(r.properties.fd) + "," + to_string(r.properties.martingale) + "\n";
    o.table = {"model       " + r.model + " on " + r.domain.to_string(), boundary_line("left ", r.left),
               boundary_line("right", r.right),
               std::string("fd          ") + to_string(r.properties.fd),
               std::string("martingale  ") + to_string(r.properties.martingale)};
    for (const auto& d : r.diagnostics) o.table.push_back("note        " + d);
    if (inconclusive(r)) o.code = Inconclusive;
    return o;
}

CompactWindow window_of(const DiffusionSpec& spec, const Inputs& in, json& params) {
    const double a = need(in.a, "--a");
    const double b = need(in.b, "--b");
    params["a"] = a;
    params["b"] = b;
    return CompactWindow(a, b, spec.domain());
}

Outcome cmd_hitprob(const Inputs& in, json& params, json& tols) {
    const DiffusionSpec spec = resolve_model(in.model);
    const double x = need(in.x, "--x");
    params["x"] = x;
    const CompactWindow w = window_of(spec, in, params);
    params["ref_point"] = in.ref_point ? json(*in.ref_point) : json(nullptr);
    tols = json(nullptr);
    const ScaleSpeed ss = build_scale_speed(spec, in.ref_point);
    const double p = hitting_probability(ss, x, w);
    Outcome o;
    o.result = json{{"analytic", p},
                    {"details",
                     {{"reference_point", ss.scale.reference_point()},
                      {"scale_increment_a_x", num(ss.scale.increment(w.a(), x))},
                      {"scale_increment_a_b", num(ss.scale.increment(w.a(), w.b()))}}}};
    o.csv = "x,a,b,analytic\n" + exact(x) + "," + exact(w.a()) + "," + exact(w.b()) + "," + exact(p) + "\n";
    o.table = {"P_x(tau_b < tau_a)  x=" + fmt(x) + "  (a,b)=(" + fmt(w.a()) + "," + fmt(w.b()) + ")  " + fmt(p, 12)};
    return o;
}

Outcome cmd_exittime(const Inputs& in, json& params, json& tols) {
    const DiffusionSpec spec = resolve_model(in.model);
    const double x = need(in.x, "--x");
    params["x"] = x;
    const CompactWindow w = window_of(spec, in, params);
    params["ref_point"] = in.ref_point ? json(*in.ref_point) : json(nullptr);
    PotentialOptions opt;
    opt.tol = tolerance(in, opt.tol);
    tols = tol_json(opt.tol);
    const ScaleSpeed ss = build_scale_speed(spec, in.ref_point);
    if (!w.in_interior(x)) throw DomainError("x = " + fmt(x) + " is outside the window");
    const auto e = expected_exit_time(ss, w, x, opt);
    Outcome o;
    o.result = json{{"analytic", num(e.value)},
                    {"details",
                     {{"error", num(e.error)},
                      {"evaluations", e.evaluations},
                      {"intervals", e.intervals},
                      {"reference_point", ss.scale.reference_point()}}}};
    o.csv = "x,a,b,analytic,error\n" + exact(x) + "," + exact(w.a()) + "," + exact(w.b()) + "," + exact(e.value) +
            "," + exact(e.error) + "\n";
    o.table = {"E_x[tau_a ^ tau_b]  x=" + fmt(x) + "  (a,b)=(" + fmt(w.a()) + "," + fmt(w.b()) + ")  " +
               fmt(e.value, 12) + " +- " + fmt(e.error, 2)};
    return o;
}

const char* verdict_label(LimitVerdict v) {
    switch (v) {
        case LimitVerdict::Vanishes: return "vanishes";
        case LimitVerdict::Positive: return "positive limit";
        case LimitVerdict::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

const char* side_name(Side s) { return s == Side::Left ? "left" : "right"; }

json profile_json(const LimitProfile& p) {
    json points = json::array(), values = json::array(), ratios = json::array();
    for (double v : p.points) points.push_back(num(v));
    for (double v : p.values) values.push_back(num(v));
    for (double v : p.ratios) ratios.push_back(num(v));
    return json{{"side", side_name(p.side)}, {"points", points},         {"values", values},
                {"ratios", ratios},          {"verdict", verdict_label(p.verdict)}, {"limit", num(p.limit)},
                {"monotone", p.monotone}};
}

void profile_rows(const LimitProfile& p, std::string& csv, std::vector<std::string>& table) {
    table.push_back(std::string(side_name(p.side)) + " boundary: " + verdict_label(p.verdict));
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const std::string ratio = i == 0 ? "" : exact(p.ratios[i - 1]);
        csv += std::string(side_name(p.side)) + "," + exact(p.points[i]) + "," + exact(p.values[i]) + "," + ratio + "\n";
        table.push_back("  " + fmt(p.points[i], 8) + "  " + fmt(p.values[i], 8) + (i ? "  " + fmt(p.ratios[i - 1], 4) : ""));
    }
}

Outcome cmd_laplace(const Inputs& in, json& params, json& tols) {
    const DiffusionSpec spec = resolve_model(in.model);
    const double alpha = need(in.alpha, "--alpha");
    const double y = need(in.y, "--y");
    if (!in.x && in.profile.empty()) throw UsageError("laplace needs --x or --profile");
    if (!in.profile.empty() && in.profile != "fd" && in.profile != "mart")
        throw UsageError("--profile takes fd or mart");
    params["alpha"] = alpha;
    params["y"] = y;
    params["x"] = in.x ? json(*in.x) : json(nullptr);
    params["profile"] = in.profile.empty() ? json(nullptr) : json(in.profile);
    params["ref_point"] = in.ref_point ? json(*in.ref_point) : json(nullptr);
    const GridPolicy policy;
    tols = json{{"cauchy", policy.tol}};

    const LaplaceSolver solver(spec, policy, in.ref_point);
    const GFunctionPair pair = solver.solve(alpha, y);
    const auto [hlo, hhi] = pair.hull();
    Outcome o;
    o.result["details"] = json{{"natural_anchor", num(pair.anchor())},
                               {"hull", {num(hlo), num(hhi)}},
                               {"wronskian_variation", num(pair.wronskian_variation())},
                               {"residual", num(pair.residual())},
                               {"truncation_levels", pair.truncation_levels()},
                               {"refinements", pair.refinements()},
                               {"grid_policy", policy.describe()}};
    if (in.x) {
        const double v = *in.x == y ? 1.0 : laplace_hitting(pair, solver.to_natural(*in.x));
        o.result["analytic"] = v;
        o.csv = "alpha,x,y,analytic\n" + exact(alpha) + "," + exact(*in.x) + "," + exact(y) + "," + exact(v) + "\n";
        o.table.push_back("E_x[exp(-alpha tau_y)]  alpha=" + fmt(alpha) + " x=" + fmt(*in.x) + " y=" + fmt(y) + "  " +
                          fmt(v, 12));
    }
    if (!in.profile.empty()) {
        json profiles = json::array();
        std::string csv = "side,point,value,ratio\n";
        o.table.push_back(in.profile == "fd" ? "E_x[exp(-alpha tau_y)] as x approaches each boundary (natural scale)"
                                             : "|z| E_x[exp(-alpha tau_z)] as z approaches each boundary (natural scale)");
        for (Side s : {Side::Left, Side::Right}) {
            if (in.profile == "mart" && std::isfinite(pair.domain().end(s))) {
                profiles.push_back(json{{"side", side_name(s)}, {"skipped", "finite boundary"}});
                o.table.push_back(std::string(side_name(s)) + " boundary: finite, skipped");
                continue;
            }
            const LimitProfile p = in.profile == "fd"
                                       ? fd_limit_check(pair, s)
                                       : mart_limit_check(pair, s, in.x ? std::optional(solver.to_natural(*in.x))
                                                                        : std::nullopt);
            profiles.push_back(profile_json(p));
            profile_rows(p, csv, o.table);
        }
        o.result["profile"] = json{{"kind", in.profile}, {"sides", profiles}};
        if (!in.x) o.csv = csv;
    }
    return o;
}

mc::SimConfig sim_config(const Inputs& in, json& params) {
    mc::SimConfig c;
    if (in.paths) c.n_paths = *in.paths;
    if (in.dt) c.dt = *in.dt;
    if (in.horizon) c.horizon = *in.horizon;
    if (in.seed) c.seed = *in.seed;
    c.workers = in.workers ? *in.workers : mc::default_workers();
    params["paths"] = c.n_paths;
    params["dt"] = c.dt;
    params["horizon"] = c.horizon;
    params["workers"] = c.workers;
    return c;
}

double start_point(const DiffusionSpec& spec, const Inputs& in) {
    return in.ref_point ? *in.ref_point : default_reference_point(spec);
}

Outcome cmd_simulate(const Inputs& in, json& params, json& tols, std::ostream& out) {
    const DiffusionSpec spec = resolve_model(in.model);
    mc::SimConfig cfg = sim_config(in, params);
    const double x0 = in.x ? *in.x : start_point(spec, in);
    params["x"] = x0;
    params["dump"] = in.dump_requested ? json(in.dump.empty() ? "-" : in.dump) : json(nullptr);
    params["dump_cap"] = in.dump_cap;
    tols = json(nullptr);
    Outcome o;
    if (in.dump_requested) {
        const std::size_t requested = cfg.n_paths;
        const std::size_t n = std::min(requested, in.dump_cap);
        cfg.n_paths = std::max<std::size_t>(requested, 100);
        std::ofstream file;
        const bool to_stdout = in.dump.empty() || in.dump == "-";
        if (!to_stdout) {
            file.open(in.dump);
            if (!file) throw UsageError("cannot open " + in.dump + " for writing");
        }
        std::ostream& sink = to_stdout ? out : file;
        sink << "path_id,t,x\n";
        std::size_t rows = 0;
        mc::simulate_paths(spec, x0, cfg, [&](std::size_t i, double t, double x) {
            sink << i << ',' << exact(t) << ',' << exact(x) << '\n';
            ++rows;
        }, n);
        o.stdout_taken = to_stdout;
        o.result = json{{"x0", x0}, {"dumped_paths", n}, {"rows", rows}};
        o.table = {"dumped " + std::to_string(n) + " paths (" + std::to_string(rows) + " rows) from x0=" + fmt(x0)};
        return o;
    }
    const auto v = mc::terminal_values(spec, x0, cfg);
    const auto stats = [](const std::vector<double>& xs) {
        double m = 0.0;
        for (double x : xs) m += x;
        m /= static_cast<double>(xs.size());
        double ss = 0.0;
        for (double x : xs) ss += (x - m) * (x - m);
        return std::pair{m, std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()))};
    };
    std::vector<double> abs(v.size());
    std::transform(v.begin(), v.end(), abs.begin(), [](double x) { return std::abs(x); });
    const auto [m, se] = stats(v);
    const auto [am, ase] = stats(abs);
    const Interval& d = spec.domain();
    const auto absorbed = std::count_if(v.begin(), v.end(), [&](double x) {
        return (d.left_closed() && x == d.left()) || (d.right_closed() && x == d.right());
    });
    o.result = json{{"x0", x0},
                    {"n_paths", v.size()},
                    {"terminal_mean", {{"mean", num(m)}, {"std_error", num(se)}}},
                    {"terminal_abs_mean", {{"mean", num(am)}, {"std_error", num(ase)}}},
                    {"absorbed_fraction", static_cast<double>(absorbed) / static_cast<double>(v.size())}};
    o.csv = "n_paths,x0,mean,std_error,abs_mean,abs_std_error\n" + std::to_string(v.size()) + "," + exact(x0) + "," +
            exact(m) + "," + exact(se) + "," + exact(am) + "," + exact(ase) + "\n";
    o.table = {"E[X_T] = " + fmt(m) + " +- " + fmt(se, 2) + "   E|X_T| = " + fmt(am) + " +- " + fmt(ase, 2)};
    return o;
}

struct Check {
    std::string name;
    double analytic = 0.0;
    mc::Estimate estimate;
    bool pass = false;
    std::string note;
};

json check_json(const Check& c) {
    return json{{"name", c.name},
                {"analytic", num(c.analytic)},
                {"estimate", num(c.estimate.mean)},
                {"std_error", num(c.estimate.std_error)},
                {"bracket", c.estimate.bracket ? json{num(c.estimate.bracket->first), num(c.estimate.bracket->second)}
                                               : json(nullptr)},
                {"n_effective", c.estimate.n_effective},
                {"truncation_fraction", c.estimate.truncation_fraction},
                {"breaches", c.estimate.breaches},
                {"pass", c.pass},
                {"note", c.note}};
}

Outcome cmd_verify(const Inputs& in, json& params, json& tols) {
    const DiffusionSpec spec = resolve_model(in.model);
    const mc::SimConfig cfg = sim_config(in, params);
    const Interval& d = spec.domain();
    const double c = start_point(spec, in);
    double room = 1.0;
    if (std::isfinite(d.left())) room = std::min(room, c - d.left());
    if (std::isfinite(d.right())) room = std::min(room, d.right() - c);
    const double a = in.a.value_or(c - 0.5 * room);
    const double b = in.b.value_or(c + 0.5 * room);
    const double x = in.x.value_or(a + 0.25 * (b - a));
    const double y = in.y.value_or(a);
    const double alpha = in.alpha.value_or(4.0);
    const double t = in.t.value_or(1.0);
    params["a"] = a;
    params["b"] = b;
    params["x"] = x;
    params["y"] = y;
    params["alpha"] = alpha;
    params["t"] = t;
    params["gap_start"] = c;
    params["ref_point"] = in.ref_point ? json(*in.ref_point) : json(nullptr);
    PotentialOptions popt;
    popt.tol = tolerance(in, popt.tol);
    tols = tol_json(popt.tol);

    const CompactWindow w(a, b, d);
    const ScaleSpeed ss = build_scale_speed(spec, in.ref_point);
    std::vector<Check> checks;

    const auto win = mc::estimate_window(spec, x, w, cfg);
    {
        Check k{"hitting_probability", hitting_probability(ss, x, w), win.hitting, false, {}};
        k.pass = k.estimate.agrees_with(k.analytic);
        checks.push_back(k);
    }
    {
        Check k{"exit_time", expected_exit_time(ss, w, x, popt).value, win.exit, false, {}};
        k.pass = !k.estimate.flagged && k.estimate.agrees_with(k.analytic);
        k.note = k.estimate.note;
        checks.push_back(k);
    }
    {
        mc::SimConfig lc = cfg;
        const double cut = 10.0 / alpha;
        if (cut < lc.horizon && lc.dt < cut) lc.horizon = cut;
        const LaplaceSolver solver(spec, GridPolicy{}, in.ref_point);
        Check k{"laplace_transform", solver.transform(alpha, x, y), mc::estimate_laplace(spec, alpha, x, y, lc), false, {}};
        k.pass = k.estimate.agrees_with(k.analytic);
        checks.push_back(k);
    }
    if (is_natural_scale(spec)) {
        ClassifyOptions copt;
        copt.reference_point = in.ref_point;
        const Answer mart = analyze(spec, copt).properties.martingale;
        Check k{"martingale_gap", 0.0, mc::estimate_martingale_gap(spec, c, t, cfg), false, {}};
        const auto& e = k.estimate;
        if (mart == Answer::Yes) {
            k.pass = std::abs(e.mean) <= 3.0 * e.std_error;
            k.note = k.pass ? "gap within 3 sigma of 0: consistent with a true martingale"
                            : "gap differs from 0 although the process is a martingale";
        } else if (mart == Answer::No) {
            k.analytic = std::numeric_limits<double>::quiet_NaN();
            k.pass = e.mean < -3.0 * e.std_error;
            k.note = k.pass ? "strictly negative gap: consistent with strict local martingale"
                            : "gap not below -3 sigma although the process is a strict local martingale";
        } else {
            k.analytic = std::numeric_limits<double>::quiet_NaN();
            k.pass = true;
            k.note = "martingale property inconclusive; gap reported only";
        }
        checks.push_back(k);
    }

    Outcome o;
    json arr = json::array();
    bool all = true;
    o.csv = "check,analytic,estimate,std_error,pass\n";
    o.table.push_back("check                 analytic        estimate        std_error   result");
    for (const auto& k : checks) {
        arr.push_back(check_json(k));
        all = all && k.pass;
        o.csv += k.name + "," + exact(k.analytic) + "," + exact(k.estimate.mean) + "," + exact(k.estimate.std_error) +
                 "," + (k.pass ? "pass" : "fail") + "\n";
        std::ostringstream row;
        row << std::left << std::setw(22) << k.name << std::setw(16) << fmt(k.analytic, 8) << std::setw(16)
            << fmt(k.estimate.mean, 8) << std::setw(12) << fmt(k.estimate.std_error, 3) << (k.pass ? "PASS" : "FAIL");
        if (!k.note.empty()) row << "  " << k.note;
        o.table.push_back(row.str());
    }
    o.result = json{{"model", spec.label()}, {"checks", arr}, {"all_pass", all}};
    if (!all) o.code = CheckFailed;
    return o;
}

Outcome cmd_catalog(const Inputs& in, json& params, json& tols) {
    (void)in;
    params = json::object();
    const ClassifyOptions opt;
    tols = tol_json(opt.tol);
    Outcome o;
    json entries = json::array();
    o.csv = "name,left,right,fd,martingale,summary\n";
    for (const auto& e : catalog()) {
        const AnalysisReport r = analyze(e.spec, opt);
        std::string left = to_string(r.left.kind), right = to_string(r.right.kind);
        if (r.left.subtype) left += std::string(" (") + to_string(*r.left.subtype) + ")";
        if (r.right.subtype) right += std::string(" (") + to_string(*r.right.subtype) + ")";
        entries.push_back(json{{"name", e.name},
                               {"summary", e.summary},
                               {"domain", domain_json(r.domain)},
                               {"left", to_string(r.left.kind)},
                               {"right", to_string(r.right.kind)},
                               {"fd", to_string(r.properties.fd)},
                               {"martingale", to_string(r.properties.martingale)}});
        o.csv += e.name + "," + left + "," + right + "," + to_string(r.properties.fd) + "," +
                 to_string(r.properties.martingale) + ",\"" + e.summary + "\"\n";
        std::ostringstream row;
        row << std::left << std::setw(14) << e.name << std::setw(40) << left << std::setw(22) << right << "fd "
            << std::setw(13) << to_string(r.properties.fd) << "martingale " << to_string(r.properties.martingale);
        o.table.push_back(row.str());
    }
    o.result = json{{"entries", entries}};
    return o;
}

void add_model(CLI::App* s, Inputs& in) {
    s->add_option("MODEL", in.model, "Catalog name or model file");
    s->add_option("-m,--model", in.model, "Catalog name or model file");
}

void add_output(CLI::App* s, Inputs& in) {
    s->add_option("--out", in.out, "Write the report to this file instead of stdout");
    s->add_option("--format", in.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
}

void add_tolerances(CLI::App* s, Inputs& in) {
    s->add_option("--tol-rel", in.tol_rel, "Relative quadrature tolerance");
    s->add_option("--tol-abs", in.tol_abs, "Absolute quadrature tolerance");
}

void add_sim(CLI::App* s, Inputs& in) {
    s->add_option("--paths", in.paths, "Number of paths");
    s->add_option("--dt", in.dt, "Euler step");
    s->add_option("--horizon", in.horizon, "Time horizon");
    s->add_option("--seed", in.seed, "Random seed");
    s->add_option("--workers", in.workers, "Worker threads (DIFFLAB_WORKERS when absent)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Boundary classification, potentials, Laplace transforms and Monte Carlo checks for "
                 "one-dimensional diffusions",
                 "difflab"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version());
    Inputs in;

    auto* classify = app.add_subcommand("classify", "Classify both boundaries and decide the FD and martingale properties");
    add_model(classify, in);
    classify->add_option("--ref-point", in.ref_point, "Reference point of the scale function");
    add_tolerances(classify, in);
    add_output(classify, in);

    auto* hitprob = app.add_subcommand("hitprob", "P_x(tau_b < tau_a)");
    auto* exittime = app.add_subcommand("exittime", "E_x[tau_a ^ tau_b]");
    for (auto* s : {hitprob, exittime}) {
        add_model(s, in);
        s->add_option("--x", in.x, "Start point");
        s->add_option("--a", in.a, "Left end of the window");
        s->add_option("--b", in.b, "Right end of the window");
        s->add_option("--ref-point", in.ref_point, "Reference point of the scale function");
        add_tolerances(s, in);
        add_output(s, in);
    }

    auto* laplace = app.add_subcommand("laplace", "E_x[exp(-alpha tau_y)] and boundary limit profiles");
    add_model(laplace, in);
    laplace->add_option("--alpha", in.alpha, "Laplace parameter");
    laplace->add_option("--y", in.y, "Target level");
    laplace->add_option("--x", in.x, "Start point");
    laplace->add_option("--profile", in.profile, "Boundary profile: fd or mart");
    laplace->add_option("--ref-point", in.ref_point, "Reference point of the scale function");
    add_output(laplace, in);

    auto* simulate = app.add_subcommand("simulate", "Euler-Maruyama paths and terminal statistics");
    add_model(simulate, in);
    simulate->add_option("--x", in.x, "Start point");
    simulate->add_option("--ref-point", in.ref_point, "Start point when --x is absent");
    add_sim(simulate, in);
    auto* dump = simulate->add_option("--dump", in.dump, "Write paths as CSV (path_id,t,x) to this file, or stdout")
                     ->expected(0, 1);
    simulate->add_option("--dump-cap", in.dump_cap, "Largest number of paths written by --dump");
    add_output(simulate, in);

    auto* verify = app.add_subcommand("verify", "Monte Carlo checks against the analytic results");
    add_model(verify, in);
    verify->add_option("--x", in.x, "Start point");
    verify->add_option("--a", in.a, "Left end of the window");
    verify->add_option("--b", in.b, "Right end of the window");
    verify->add_option("--y", in.y, "Laplace target level");
    verify->add_option("--alpha", in.alpha, "Laplace parameter");
    verify->add_option("--t", in.t, "Time of the martingale-gap check");
    verify->add_option("--ref-point", in.ref_point, "Reference point; also the martingale-gap start");
    add_sim(verify, in);
    add_tolerances(verify, in);
    add_output(verify, in);

    auto* cat = app.add_subcommand("catalog", "List the built-in models with their classifications");
    add_output(cat, in);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? Ok : InvalidInput;
    }
    in.dump_requested = dump->count() > 0;

    const CLI::App* chosen = app.get_subcommands().front();
    const std::string command = chosen->get_name();
    try {
        json params = json::object();
        json tols = json(nullptr);
        Outcome o;
        if (command == "classify") o = cmd_classify(in, params, tols);
        else if (command == "hitprob") o = cmd_hitprob(in, params, tols);
        else if (command == "exittime") o = cmd_exittime(in, params, tols);
        else if (command == "laplace") o = cmd_laplace(in, params, tols);
        else if (command == "simulate") o = cmd_simulate(in, params, tols, out);
        else if (command == "verify") o = cmd_verify(in, params, tols);
        else o = cmd_catalog(in, params, tols);

        const bool mc = command == "simulate" || command == "verify";
        json manifest{{"command", command},
                      {"argv", args},
                      {"model", command == "catalog" ? json(nullptr) : json(in.model)},
                      {"parameters", params},
                      {"tolerances", tols},
                      {"seed", mc ? json(in.seed.value_or(mc::SimConfig{}.seed)) : json(nullptr)},
                      {"tool_version", version()},
                      {"timestamp", timestamp()}};

        std::string body;
        if (in.format == "csv" && !o.csv.empty()) {
            body = o.csv;
        } else {
            json report{{"manifest", manifest}, {"result", o.result}};
            body = report.dump(2) + "\n";
        }
        if (!in.out.empty()) {
            std::ofstream f(in.out);
            if (!f) throw UsageError("cannot open " + in.out + " for writing");
            f << body;
        } else if (!o.stdout_taken) {
            out << body;
        }
        for (const auto& line : o.table) err << line << '\n';
        return o.code;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return InvalidInput;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return InvalidInput;
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << '\n';
        return InvalidInput;
    } catch (const ModelFileError& e) {
        err << "error: " << e.what() << '\n';
        return InvalidInput;
    } catch (const ExpressionError& e) {
        err << "error: " << e.what() << '\n';
        return InvalidInput;
    } catch (const UnsupportedBoundary& e) {
        err << "error: " << e.what() << '\n';
        return InvalidInput;
    } catch (const OutOfGrid& e) {
        err << "error: " << e.what() << '\n';
        return InvalidInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return NumericalFailure;
    }
}

}  // namespace difflab::cli
