#include "srblab/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <concepts>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "srblab/cocycle.hpp"
#include "srblab/curves.hpp"
#include "srblab/density.hpp"
#include "srblab/dynamics.hpp"
#include "srblab/errors.hpp"
#include "srblab/maps.hpp"
#include "srblab/parallel.hpp"
#include "srblab/reptree.hpp"
#include "srblab/srb.hpp"

namespace fs = std::filesystem;

namespace srblab {

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PreconditionError("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream o(path, std::ios::binary);
    o << text;
    if (!o) throw std::runtime_error("cannot write " + path.string());
}

std::string field(const std::string& s) { return s; }
std::string field(const char* s) { return s; }
std::string field(bool b) { return b ? "true" : "false"; }
std::string field(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}
template <std::integral T>
    requires(!std::same_as<T, bool>)
std::string field(T v) {
    return std::to_string(v);
}

struct Csv {
    std::string text;
    template <class... T>
    void row(const T&... v) {
        bool first = true;
        ((text += first ? "" : ",", text += field(v), first = false), ...);
        text += '\n';
    }
};

Vec2 parse_point(const std::string& s) {
    auto c = s.find(',');
    try {
        if (c == std::string::npos) throw std::invalid_argument(s);
        return {std::stod(s.substr(0, c)), std::stod(s.substr(c + 1))};
    } catch (const std::exception&) {
        throw DomainError("expected a point X,Y, got '" + s + "'");
    }
}

int parse_threads(const std::string& s) {
    if (s == "auto") return 0;
    try {
        std::size_t pos = 0;
        int n = std::stoi(s, &pos);
        if (pos == s.size() && n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw DomainError("--threads expects a positive integer or auto, got '" + s + "'");
}

class Run {
public:
    Run(fs::path dir, RunManifest m, std::ostream& out) : dir_(std::move(dir)), m_(std::move(m)), out_(out) {
        fs::create_directories(dir_);
        start_ = std::chrono::steady_clock::now();
    }

    std::ostream& out() { return out_; }
    const RunManifest& manifest() const { return m_; }

    void emit(const std::string& name, const std::string& text) {
        write_file(dir_ / name, text);
        m_.outputs[name] = sha256_hex(text);
    }
    void input(const std::string& path) { m_.inputs[path] = file_sha256(path); }

    template <class F>
    auto timed(const std::string& step, F&& f) {
        auto t0 = std::chrono::steady_clock::now();
        auto finish = [&] {
            m_.timings_ms.emplace_back(step, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        };
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            finish();
        } else {
            auto r = f();
            finish();
            return r;
        }
    }

    void finish() {
        m_.timings_ms.emplace_back("total", std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count());
        write_file(dir_ / "manifest.txt", m_.serialize());
    }

private:
    fs::path dir_;
    RunManifest m_;
    std::ostream& out_;
    std::chrono::steady_clock::time_point start_;
};

std::string file_input(const std::string& set_spec) {
    return set_spec.rfind("file:", 0) == 0 ? set_spec.substr(5) : std::string();
}

double parse_eps(const std::string& s) {
    if (s == "auto") return 0;
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos == s.size() && v > 0) return v;
    } catch (const std::exception&) {
    }
    throw DomainError("--eps expects auto or a positive number, got '" + s + "'");
}

// ---- subcommands ----

struct DensityArgs {
    std::string set_spec;
    std::int64_t horizon = 0;
    std::int64_t closure = 1;
    std::string report = "csv";
};

void run_density(Run& run, const DensityArgs& a) {
    if (a.horizon < 1) throw DomainError("density: --horizon must be positive");
    if (a.closure < 0) throw DomainError("density: --closure must be nonnegative");
    if (auto p = file_input(a.set_spec); !p.empty()) run.input(p);
    IntegerSet E = run.timed("parse", [&] { return parse_set_spec(a.set_spec, a.horizon); });
    IntegerSet dE = boundary(E), cE = closure_M(E, a.closure);
    std::vector<std::int64_t> ns;
    for (std::int64_t n = 1; n < a.horizon; n *= 2) ns.push_back(n);
    ns.push_back(a.horizon);
    Csv t;
    t.row("n", "d_n", "d_boundary", "d_closureM");
    for (auto n : ns) t.row(n, density_upto(E, n), density_upto(dE, n), density_upto(cE, n));
    run.emit("density.csv", t.text);
    auto ex = density_exact(E, a.horizon);
    auto rep = density_report(E, ns);
    Csv s;
    s.row("horizon", "count", "d_n", "upper", "lower", "closure", "d_closureM");
    s.row(a.horizon, ex.num, ex.value(), rep.upper, rep.lower, a.closure, density_upto(cE, a.horizon));
    run.emit("summary.csv", s.text);
    run.out() << t.text << "d_" << a.horizon << " = " << ex.num << "/" << ex.den << "\n";
}

struct FolnerArgs {
    std::string set_spec;
    std::int64_t horizon = 0;
    std::int64_t m0 = 0;
    int checkpoints = 8;
    double rho = 2.0;
    double tolerance = 0.05;
};

void run_folner(Run& run, const FolnerArgs& a) {
    if (a.horizon < 1) throw DomainError("folner: --horizon must be positive");
    if (auto p = file_input(a.set_spec); !p.empty()) run.input(p);
    IntegerSet E = parse_set_spec(a.set_spec, a.horizon);
    auto fill = run.timed("fill", [&] { return folner_fill(E, a.m0, a.checkpoints, FillOptions{a.rho, a.tolerance}); });
    Csv t;
    t.row("n", "d_F", "d_EF", "d_boundary");
    for (const auto& c : fill.checkpoints) t.row(c.n, c.d_F, c.d_EF, c.d_boundary);
    run.emit("folner.csv", t.text);
    IntegerSet dF = boundary(fill.F);
    std::string sub;
    for (auto n : fill.subsequence) sub += (sub.empty() ? "" : ";") + std::to_string(n);
    Csv s;
    s.row("observed_upper", "F_size", "boundary_size", "boundary_in_E", "d_EF", "d_boundary", "subsequence");
    double dEF = fill.checkpoints.empty() ? 0 : fill.checkpoints.back().d_EF;
    double dB = fill.checkpoints.empty() ? 0 : fill.checkpoints.back().d_boundary;
    s.row(fill.observed_upper, fill.F.size(), dF.size(), dF.subset_of(E), dEF, dB, sub);
    run.emit("summary.csv", s.text);
    run.out() << s.text;
}

struct CurvesArgs {
    std::string spec;
    double eps = 0;
};

// One piece per line: LO HI then coefficient pairs X0 Y0 X1 Y1 ... in the local variable.
CurveJet read_curve_spec(const std::string& text) {
    std::vector<CurvePiece> pieces;
    int degree = 0;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::istringstream ls(line);
        std::vector<double> v;
        std::string tok;
        while (ls >> tok) {
            try {
                std::size_t pos = 0;
                v.push_back(std::stod(tok, &pos));
                if (pos != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw DomainError("curves: line " + std::to_string(lineno) + ": bad number '" + tok + "'");
            }
        }
        if (v.empty()) continue;
        if (v.size() < 4 || v.size() % 2)
            throw DomainError("curves: line " + std::to_string(lineno) + ": expected LO HI and coefficient pairs");
        CurvePiece c;
        c.lo = v[0];
        c.hi = v[1];
        for (std::size_t i = 2; i < v.size(); i += 2) c.p.c.push_back({v[i], v[i + 1]});
        degree = std::max(degree, c.p.degree());
        pieces.push_back(std::move(c));
    }
    if (pieces.empty()) throw DomainError("curves: no pieces");
    CurveJet g(std::move(pieces), std::max(CurveJet::kDefaultOrder, degree));
    try {
        g.validate();
    } catch (const InvariantError& e) {
        throw PreconditionError(std::string("curves: ") + e.what());
    }
    return g;
}

void run_curves_check(Run& run, const CurvesArgs& a) {
    if (a.eps < 0) throw DomainError("curves check: --eps must be nonnegative");
    run.input(a.spec);
    CurveJet g = read_curve_spec(read_file(a.spec));
    Csv t;
    t.row("piece", "lo", "hi", "degree", "sup_speed", "inf_speed");
    for (std::size_t i = 0; i < g.pieces().size(); ++i) {
        const auto& c = g.pieces()[i];
        t.row(i, c.lo, c.hi, c.p.degree(), poly::sup_norm(c.p, 1) / c.half(), poly::inf_norm(c.p, 1) / c.half());
    }
    run.emit("pieces.csv", t.text);
    auto v = is_bounded(g);
    bool strong = a.eps > 0 && is_strongly_bounded(g, a.eps);
    double dist = distortion(g), osc = oscillation(g);
    if (v.ok && (dist > 1.5 * (1 + 1e-12) || osc > std::numbers::pi / 6 * (1 + 1e-12)))
        throw InvariantError("curves check: bounded curve with distortion " + field(dist) + " or oscillation " + field(osc) +
                             " past the bounds");
    Csv s;
    s.row("bounded", "margin", "speed", "higher", "strongly_bounded", "eps", "distortion", "oscillation");
    s.row(v.ok, v.margin, v.speed, v.higher, strong, a.eps, dist, osc);
    run.emit("summary.csv", s.text);
    run.out() << s.text;
}

struct MapArgs {
    std::string map = "cat";
};

struct ReptreeArgs : MapArgs {
    int p = 4;
    int depth = 4;
    std::string eps = "auto";
    int samples = 1000;
    std::string seed_curve = "h:0.3";
    std::size_t max_nodes = 2'000'000;
};

void run_reptree(Run& run, const ReptreeArgs& a) {
    auto f = make_map(a.map);
    double eps = parse_eps(a.eps);
    if (eps == 0) eps = run.timed("scale", [&] { return choose_scale(*f, a.p).eps; });
    CurveJet sigma = seed_curve(*f, a.seed_curve, eps);
    TreeOptions to;
    to.max_nodes = a.max_nodes;
    RepTree tree = run.timed("build", [&] { return build_tree(*f, a.p, sigma, eps, a.depth, to); });
    Csv t;
    t.row("level", "node_id", "parent_id", "color", "k", "kprime", "rate", "center");
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const auto& n = tree.nodes[i];
        t.row(n.level, i, n.parent, n.red ? "red" : "blue", n.label.k, n.label.kprime, n.rate, n.theta.c);
    }
    run.emit("reptree.csv", t.text);
    auto cov = run.timed("coverage", [&] { return check_coverage(*f, tree, a.samples); });
    auto lb = leaf_bound_check(tree);
    Csv s;
    s.row("eps", "depth", "nodes", "leaves", "truncated", "samples", "covered", "coverage", "miss_level", "leaf_sequences",
          "leaf_worst_ratio", "leaf_violations", "valence_violations");
    s.row(eps, tree.depth, tree.nodes.size(), tree.level_size(tree.depth), tree.truncated, cov.samples, cov.covered,
          static_cast<double>(cov.covered) / cov.samples, cov.miss_level, lb.sequences, lb.worst_ratio, lb.violations,
          tree.valence.violations);
    run.emit("coverage.csv", s.text);
    run.out() << s.text;
}

struct LyapArgs : MapArgs {
    long n = 10000;
    int grid = 1;
};

void run_lyap(Run& run, const LyapArgs& a) {
    auto f = make_map(a.map);
    if (a.n < 1 || a.grid < 1) throw DomainError("lyap: --n and --grid must be positive");
    const std::size_t G = static_cast<std::size_t>(a.grid) * static_cast<std::size_t>(a.grid);
    std::vector<Vec2> x(G);
    std::vector<LyapunovPair> chi(G, {std::nan(""), std::nan("")});
    run.timed("exponents", [&] {
        parallel_for(G, [&](std::size_t i) {
            x[i] = raster_point(*f, a.grid, i);
            try {
                chi[i] = lyapunov_pair(*f, x[i], a.n);
            } catch (const EscapeError&) {
            }
        });
    });
    Csv t;
    t.row("x", "y", "chi");
    std::size_t escaped = 0;
    double s1 = 0, s2 = 0, lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < G; ++i) {
        t.row(x[i].x, x[i].y, chi[i].chi1);
        if (std::isnan(chi[i].chi1)) {
            ++escaped;
            continue;
        }
        s1 += chi[i].chi1;
        s2 += chi[i].chi2;
        lo = std::min(lo, chi[i].chi1);
        hi = std::max(hi, chi[i].chi1);
    }
    run.emit("lyap.csv", t.text);
    double m = static_cast<double>(G - escaped);
    Csv s;
    s.row("points", "escaped", "chi1_mean", "chi1_min", "chi1_max", "chi2_mean");
    s.row(G, escaped, m > 0 ? s1 / m : NAN, lo, hi, m > 0 ? s2 / m : NAN);
    run.emit("summary.csv", s.text);
    run.out() << s.text;
}

struct EntropyArgs : MapArgs {
    int grid = 4;
    int depth = 6;
    long orbit_length = 100000;
    std::string x0;
};

void run_entropy(Run& run, const EntropyArgs& a, std::uint64_t seed) {
    auto f = make_map(a.map);
    if (a.grid < 1 || a.depth < 1 || a.orbit_length < 1) throw DomainError("entropy: --grid, --depth and --orbit-length must be positive");
    Vec2 x;
    if (a.x0.empty()) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(0, 1);
        Vec2 lo = f->box_lo(), hi = f->box_hi();
        x = {lo.x + (hi.x - lo.x) * U(rng), lo.y + (hi.y - lo.y) * U(rng)};
    } else {
        x = parse_point(a.x0);
    }
    WeightedPointMeasure<Vec2> mu;
    mu.atoms.reserve(static_cast<std::size_t>(a.orbit_length));
    Vec2 y = f->normalize(x);
    for (long k = 0; k < a.orbit_length; ++k) {
        mu.atoms.push_back({y, 1.0 / static_cast<double>(a.orbit_length)});
        y = f->forward(y);
    }
    auto P = BoxPartition::grid(*f, a.grid, seed);
    std::map<std::int64_t, double> w;
    for (const auto& at : mu.atoms) w[P.cell(at.state)] += at.weight;
    Csv t;
    t.row("cell", "weight");
    for (const auto& [c, v] : w) t.row(c, v);
    run.emit("entropy.csv", t.text);
    auto est = run.timed("estimate", [&] { return entropy_estimate(*f, mu, a.grid, a.depth, seed); });
    Csv s;
    s.row("H", "h_estimate");
    s.row(entropy_of(w), est.h);
    run.emit("summary.csv", s.text);
    run.out() << s.text;
}

struct ContractingArgs : MapArgs {
    long n = 10000;
    int grid = 3;
    double eps = 0.1;
    std::string center;
    double radius = 0.01;
};

void run_contracting(Run& run, const ContractingArgs& a) {
    auto f = make_map(a.map);
    if (a.grid < 2 || !(a.radius > 0)) throw DomainError("contracting: need --grid >= 2 and --radius > 0");
    Vec2 c = a.center.empty() ? (f->box_lo() + f->box_hi()) * 0.5 : parse_point(a.center);
    std::vector<Vec2> U;
    for (int i = 0; i < a.grid; ++i)
        for (int j = 0; j < a.grid; ++j)
            U.push_back(c + Vec2{-a.radius + 2 * a.radius * i / (a.grid - 1), -a.radius + 2 * a.radius * j / (a.grid - 1)});
    auto prof = run.timed("profile", [&] { return contracting_profile(*f, U, a.eps, a.n); });
    Csv t;
    t.row("k", "diam");
    for (std::size_t k = 0; k < prof.diameters.size(); ++k) t.row(k, prof.diameters[k]);
    run.emit("contracting.csv", t.text);
    double mx = -INFINITY;
    for (double e : prof.exponents) mx = std::max(mx, e);
    Csv s;
    s.row("density", "upper", "lower", "max_exponent", "points");
    s.row(static_cast<double>(prof.E.count_upto(a.n)) / static_cast<double>(a.n), prof.report.upper, prof.report.lower, mx, U.size());
    run.emit("summary.csv", s.text);
    run.out() << s.text;
}

struct SrbArgs : MapArgs {
    PipelineOptions opt;
    std::string eps = "auto";
    std::string seed_curve = "h:0.3";
    int raster_grid = 32;
    long raster_n = 8000;
    double raster_threshold = 0.1;
};

void run_srb(Run& run, SrbArgs a, std::uint64_t seed) {
    auto f = make_map(a.map);
    a.opt.seed = seed;
    a.opt.eps = parse_eps(a.eps);
    if (a.opt.eps == 0) a.opt.eps = run.timed("scale", [&] { return choose_scale(*f, a.opt.p).eps; });
    CurveJet sigma = seed_curve(*f, a.seed_curve, a.opt.eps);
    SrbCandidate c = run.timed("pipeline", [&] { return run_pipeline(*f, sigma, a.opt); });

    Csv atoms;
    atoms.row("x", "y", "angle", "weight");
    for (const auto& at : c.measure.atoms) atoms.row(at.state.base.x, at.state.base.y, at.state.angle, at.weight);
    run.emit("candidate.csv", atoms.text);

    Csv s;
    s.row("chi1", "entropy", "verdict", "stability", "delta_q");
    s.row(c.chi1, c.entropy, to_string(c.verdict), c.stability, c.delta_q);
    run.emit("summary.csv", s.text);

    auto ru = ruelle_check(c);
    Csv d;
    d.row("chi2", "eps", "tau", "r_estimate", "n", "samples", "in_A", "selected", "plan_entries", "largeness_margin",
          "psi_margin", "ruelle_margin", "ruelle_ok", "entropy_2R", "entropy_4R", "reason");
    auto ent = [&](std::size_t i) { return i < c.entropy_by_resolution.size() ? c.entropy_by_resolution[i].h : NAN; };
    d.row(c.chi2, c.eps, c.tau, c.r_estimate, c.n, c.samples, c.in_A, c.selected, c.plan_entries, c.largeness_margin,
          c.psi_margin, ru.margin, ru.ok, ent(1), ent(2), c.reason);
    run.emit("details.csv", d.text);

    Csv r;
    r.row("x", "y", "chi", "label", "distance");
    if (a.raster_grid > 0) {
        BasinRaster br;
        if (!c.projected.atoms.empty()) {
            br = run.timed("raster", [&] {
                return basin_raster(*f, {c}, a.raster_grid, a.raster_n, a.opt.b, a.raster_threshold);
            });
        } else {
            auto ep = exponent_partition(*f, a.raster_grid, a.raster_n, a.opt.b);
            br.grid = a.raster_grid;
            br.chi = ep.chi;
            br.label.assign(ep.chi.size(), -1);
            br.distance.assign(ep.chi.size(), INFINITY);
        }
        for (std::size_t i = 0; i < br.label.size(); ++i) {
            Vec2 x = raster_point(*f, a.raster_grid, i);
            r.row(x.x, x.y, br.chi[i], br.label[i], br.distance[i]);
        }
    }
    run.emit("raster.csv", r.text);
    run.out() << s.text;
    if (!c.reason.empty()) run.out() << "reason: " << c.reason << "\n";
}

// Registers an option whose default is recorded in the manifest.
template <class T>
CLI::Option* opt(CLI::App* app, const std::string& name, T& var, const std::string& help) {
    return app->add_option(name, var, help)->capture_default_str();
}

std::string join_path(const CLI::App* leaf) {
    std::vector<std::string> names;
    for (const CLI::App* a = leaf; a && a->get_parent(); a = a->get_parent()) names.push_back(a->get_name());
    std::reverse(names.begin(), names.end());
    std::string s;
    for (const auto& n : names) s += (s.empty() ? "" : " ") + n;
    return s;
}

}  // namespace

std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

std::string RunManifest::serialize() const {
    std::string s = "version=" + version + "\n";
    s += "subcommand=" + subcommand + "\n";
    s += "seed=" + std::to_string(seed) + "\n";
    s += "threads=" + threads + "\n";
    for (const auto& [k, v] : flags) s += "flag." + k + "=" + v + "\n";
    for (const auto& [k, v] : inputs) s += "input." + k + "=" + v + "\n";
    for (const auto& [k, v] : outputs) s += "output." + k + "=" + v + "\n";
    for (const auto& [k, v] : timings_ms) s += "time." + k + "_ms=" + field(v) + "\n";
    return s + "digest=" + sha256_hex(s) + "\n";
}

RunManifest RunManifest::parse(const std::string& text) {
    auto at = text.rfind("\ndigest=");
    if (at == std::string::npos) throw PreconditionError("manifest: missing digest line");
    std::string body = text.substr(0, at + 1);
    std::string digest = text.substr(at + 8);
    while (!digest.empty() && (digest.back() == '\n' || digest.back() == '\r')) digest.pop_back();
    if (digest != sha256_hex(body)) throw PreconditionError("manifest: digest mismatch, refusing to replay a modified manifest");
    RunManifest m;
    m.version.clear();
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw PreconditionError("manifest: malformed line '" + line + "'");
        std::string k = line.substr(0, eq), v = line.substr(eq + 1);
        auto prefixed = [&](const char* p, std::map<std::string, std::string>& dst) {
            std::string pre = p;
            if (k.rfind(pre, 0) != 0) return false;
            dst[k.substr(pre.size())] = v;
            return true;
        };
        if (k == "version")
            m.version = v;
        else if (k == "subcommand")
            m.subcommand = v;
        else if (k == "seed")
            m.seed = std::stoull(v);
        else if (k == "threads")
            m.threads = v;
        else if (prefixed("flag.", m.flags) || prefixed("input.", m.inputs) || prefixed("output.", m.outputs))
            continue;
        else if (k.rfind("time.", 0) == 0)
        {
            std::string step = k.substr(5);
            if (step.size() > 3 && step.ends_with("_ms")) step.resize(step.size() - 3);
            m.timings_ms.emplace_back(step, std::stod(v));
        }
        else
            throw PreconditionError("manifest: unknown key '" + k + "'");
    }
    return m;
}

int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"srblab: finite-horizon SRB diagnostics for surface maps", "srblab"};
    app.require_subcommand(1);
    app.fallthrough();
    std::uint64_t seed = 1;
    std::string threads = "auto", out_dir = ".";
    opt(&app, "--seed", seed, "RNG seed");
    opt(&app, "--threads", threads, "worker count N or auto");
    opt(&app, "--out", out_dir, "output directory");
    app.set_config("--config", "", "flat key=value file; command-line flags take precedence");

    DensityArgs da;
    auto* density = app.add_subcommand("density", "densities, boundary and M-closure of an integer set");
    opt(density, "--set-spec", da.set_spec, "evens | odds | all | blocks:B^k..C*B^k | file:PATH")->required();
    opt(density, "--horizon", da.horizon, "horizon N")->required();
    opt(density, "--closure", da.closure, "closure gap M");
    opt(density, "--report", da.report, "report format")->check(CLI::IsMember({"csv"}));

    FolnerArgs fa;
    auto* folner = app.add_subcommand("folner", "Folner fill of an integer set");
    opt(folner, "--set-spec", fa.set_spec, "integer set expression")->required();
    opt(folner, "--horizon", fa.horizon, "horizon N")->required();
    opt(folner, "--m0", fa.m0, "closure gap M0, 0 for the default");
    opt(folner, "--checkpoints", fa.checkpoints, "ladder length");
    opt(folner, "--rho", fa.rho, "ladder ratio");
    opt(folner, "--tolerance", fa.tolerance, "density tolerance");

    CurvesArgs ca;
    auto* curves = app.add_subcommand("curves", "bounded-curve checks");
    curves->require_subcommand(1);
    curves->fallthrough();
    auto* check = curves->add_subcommand("check", "boundedness verdicts and margins of a piecewise curve");
    opt(check, "--spec", ca.spec, "coefficient file: LO HI X0 Y0 X1 Y1 ... per piece")->required();
    opt(check, "--eps", ca.eps, "scale for the strong check, 0 to skip");

    ReptreeArgs ra;
    auto* reptree = app.add_subcommand("reptree", "reparametrization trees");
    reptree->require_subcommand(1);
    reptree->fallthrough();
    auto* build = reptree->add_subcommand("build", "build a tree and check coverage");
    opt(build, "--map", ra.map, "map spec");
    opt(build, "--p", ra.p, "step p of g = f^p");
    opt(build, "--depth", ra.depth, "tree depth");
    opt(build, "--eps", ra.eps, "auto or a scale");
    opt(build, "--samples", ra.samples, "coverage samples");
    opt(build, "--seed-curve", ra.seed_curve, "h|v|d[:OFFSET]");
    opt(build, "--max-nodes", ra.max_nodes, "node budget");

    LyapArgs la;
    auto* lyap = app.add_subcommand("lyap", "Lyapunov exponents on a grid");
    opt(lyap, "--map", la.map, "map spec");
    opt(lyap, "--n", la.n, "orbit length");
    opt(lyap, "--grid", la.grid, "grid side");

    EntropyArgs ea;
    auto* entropy = app.add_subcommand("entropy", "partition entropy of an orbit measure");
    opt(entropy, "--map", ea.map, "map spec");
    opt(entropy, "--grid", ea.grid, "partition resolution R");
    opt(entropy, "--depth", ea.depth, "largest block depth m");
    opt(entropy, "--orbit-length", ea.orbit_length, "orbit length n");
    opt(entropy, "--x0", ea.x0, "start point X,Y (seeded when empty)");

    ContractingArgs ka;
    auto* contracting = app.add_subcommand("contracting", "expanding-time set of a small square");
    opt(contracting, "--map", ka.map, "map spec");
    opt(contracting, "--n", ka.n, "horizon");
    opt(contracting, "--grid", ka.grid, "sample grid side");
    opt(contracting, "--eps", ka.eps, "diameter threshold");
    opt(contracting, "--center", ka.center, "square centre X,Y (box centre when empty)");
    opt(contracting, "--radius", ka.radius, "square half side");

    SrbArgs sa;
    auto* srb = app.add_subcommand("srb", "SRB candidate pipeline");
    srb->require_subcommand(1);
    srb->fallthrough();
    auto* srbrun = srb->add_subcommand("run", "run the pipeline from a seed curve");
    opt(srbrun, "--map", sa.map, "map spec");
    opt(srbrun, "--b", sa.opt.b, "exponent threshold b");
    opt(srbrun, "--p", sa.opt.p, "step p");
    opt(srbrun, "--q", sa.opt.q, "psi order q");
    opt(srbrun, "--depth", sa.opt.depth, "branch depth");
    opt(srbrun, "--horizon", sa.opt.horizon, "exponent horizon");
    opt(srbrun, "--seed-curve", sa.seed_curve, "h|v|d[:OFFSET]");
    opt(srbrun, "--eps", sa.eps, "auto or a scale");
    opt(srbrun, "--samples", sa.opt.samples, "samples on the seed curve");
    opt(srbrun, "--plan-tolerance", sa.opt.plan_tolerance, "Folner tolerance of the plan");
    opt(srbrun, "--resolution", sa.opt.resolution, "entropy partition resolution");
    opt(srbrun, "--max-word", sa.opt.max_word, "largest entropy block depth");
    opt(srbrun, "--tolerance", sa.opt.tolerance, "relative entropy-exponent tolerance");
    opt(srbrun, "--stability-cap", sa.opt.stability_cap, "largest accepted stability distance");
    opt(srbrun, "--raster-grid", sa.raster_grid, "basin raster side, 0 to skip");
    opt(srbrun, "--raster-n", sa.raster_n, "basin raster orbit length");
    opt(srbrun, "--raster-threshold", sa.raster_threshold, "basin distance threshold");

    std::string manifest_path;
    auto* rep = app.add_subcommand("replay", "re-run a manifest and compare output digests");
    rep->add_option("manifest", manifest_path, "manifest.txt of an earlier run")->required();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "srblab: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (rep->parsed())
            return replay(manifest_path, app["--out"]->count() ? out_dir : std::string(), app["--threads"]->count() ? threads : "",
                          out, err);

        set_threads(parse_threads(threads));
        CLI::App* leaf = &app;
        while (!leaf->get_subcommands().empty()) leaf = leaf->get_subcommands().front();
        RunManifest m;
        m.subcommand = join_path(leaf);
        m.seed = seed;
        m.threads = threads;
        for (const CLI::Option* o : leaf->get_options()) {
            if (o->get_single_name() == "help") continue;
            std::string v;
            if (o->count()) {
                for (const auto& r : o->results()) v += (v.empty() ? "" : ",") + r;
            } else {
                v = o->get_default_str();
                if (v.empty()) continue;
            }
            m.flags[o->get_single_name()] = v;
        }
        Run run(out_dir, std::move(m), out);
        if (density->parsed())
            run_density(run, da);
        else if (folner->parsed())
            run_folner(run, fa);
        else if (check->parsed())
            run_curves_check(run, ca);
        else if (build->parsed())
            run_reptree(run, ra);
        else if (lyap->parsed())
            run_lyap(run, la);
        else if (entropy->parsed())
            run_entropy(run, ea, seed);
        else if (contracting->parsed())
            run_contracting(run, ka);
        else if (srbrun->parsed())
            run_srb(run, sa, seed);
        run.finish();
        return kExitOk;
    } catch (const InvariantError& e) {
        err << "srblab: invariant violated: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const DomainError& e) {
        err << "srblab: " << e.what() << "\n";
        return kExitPrecondition;
    } catch (const PreconditionError& e) {
        err << "srblab: " << e.what() << "\n";
        return kExitPrecondition;
    } catch (const std::exception& e) {
        err << "srblab: " << e.what() << "\n";
        return kExitFailure;
    }
}

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    return parse_and_dispatch(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

int replay(const std::string& manifest_path, const std::string& out_dir, const std::string& threads, std::ostream& out,
           std::ostream& err) {
    RunManifest m;
    try {
        m = RunManifest::parse(read_file(manifest_path));
        if (m.version != kArtifactVersion)
            throw PreconditionError("replay: manifest version " + m.version + " differs from " + kArtifactVersion);
        for (const auto& [path, digest] : m.inputs)
            if (file_sha256(path) != digest) throw PreconditionError("replay: input " + path + " changed since the run");
    } catch (const PreconditionError& e) {
        err << "srblab: " << e.what() << "\n";
        return kExitPrecondition;
    }
    fs::path dir = out_dir.empty() ? fs::path(manifest_path).parent_path() / "replay" : fs::path(out_dir);
    std::vector<std::string> args{"--seed", std::to_string(m.seed), "--threads", threads.empty() ? m.threads : threads,
                                  "--out", dir.string()};
    std::istringstream words(m.subcommand);
    for (std::string w; words >> w;) args.push_back(w);
    for (const auto& [k, v] : m.flags) {
        args.push_back("--" + k);
        args.push_back(v);
    }
    std::ostringstream sink;
    int rc = parse_and_dispatch(args, sink, err);
    if (rc != kExitOk) return rc;
    int mismatched = 0;
    for (const auto& [name, digest] : m.outputs) {
        std::error_code ec;
        std::string got = fs::exists(dir / name, ec) ? file_sha256((dir / name).string()) : "missing";
        if (got != digest) {
            err << "srblab: replay: " << name << " differs (" << got << " vs " << digest << ")\n";
            ++mismatched;
        }
    }
    if (mismatched) return kExitInvariant;
    out << "replay: " << m.outputs.size() << " outputs identical\n";
    return kExitOk;
}

}  // namespace srblab
