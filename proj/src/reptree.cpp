#include "srblab/reptree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>

#include "srblab/cocycle.hpp"
#include "srblab/dynamics.hpp"
#include "srblab/errors.hpp"
#include "srblab/parallel.hpp"

namespace srblab {

using poly::VPoly;

namespace {

// d_y f^steps along the orbit of y.
Mat2 orbit_differential(const SurfaceMap& f, Vec2 y, int steps) {
    Mat2 D = Mat2::identity();
    for (int k = 0; k < steps; ++k) {
        D = f.differential(y) * D;
        y = f.forward(y);
    }
    return D;
}

struct Tangent {
    Vec2 y, v;
};

Tangent push_tangent(const SurfaceMap& f, Tangent t, int steps) {
    for (int k = 0; k < steps; ++k) {
        t.v = f.differential(t.y) * t.v;
        t.y = f.forward(t.y);
    }
    return t;
}

Tangent curve_tangent(const SurfaceMap& f, const CurveJet& sigma, const AffineMap& theta, double s) {
    return {f.normalize(sigma.eval(theta(s))), sigma.derivative(theta(s)) * theta.rho};
}

void align(const SurfaceMap& f, std::vector<CurvePiece>& ps) {
    if (f.domain() != DomainKind::Torus) return;
    for (std::size_t i = 1; i < ps.size(); ++i) {
        Vec2 d = ps[i].p.eval(-1) - ps[i - 1].p.eval(1);
        ps[i].p.c[0] -= Vec2{std::round(d.x), std::round(d.y)};
    }
}

}  // namespace

double injectivity_radius(const SurfaceMap& f) {
    if (f.domain() == DomainKind::Torus) return 0.5;
    Vec2 d = f.box_hi() - f.box_lo();
    return 0.5 * std::min(d.x, d.y);
}

ScaleChoice choose_scale(const SurfaceMap& f, int p, int grid, int order) {
    if (p < 1) throw DomainError("choose_scale: p must be positive");
    if (grid < 2) throw DomainError("choose_scale: grid must be at least 2");
    ScaleChoice out;
    out.r_inj = injectivity_radius(f);
    out.grid = grid;
    Vec2 lo = f.box_lo(), hi = f.box_hi();
    std::size_t cells = static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);

    std::vector<Vec2> ball{{0, 0}};
    for (int j = 0; j < 8; ++j) ball.push_back(unit_from_angle(std::numbers::pi * j / 4));
    for (int j = 0; j < 4; ++j) ball.push_back(unit_from_angle(std::numbers::pi * (j + 0.5) / 2) * 0.5);
    constexpr int kDirs = 8;

    for (int j = 0;; ++j) {
        double eps = 0.5 * out.r_inj * std::ldexp(1.0, -j);
        if (eps < 1e-6) throw PreconditionError("choose_scale: no admissible eps above 1e-6");
        std::vector<double> jet(cells, 0), cont(cells, 0);
        parallel_for(cells, [&](std::size_t i) {
            int ix = static_cast<int>(i % static_cast<std::size_t>(grid)), iy = static_cast<int>(i / static_cast<std::size_t>(grid));
            Vec2 x{lo.x + (hi.x - lo.x) * (ix + 0.5) / grid, lo.y + (hi.y - lo.y) * (iy + 0.5) / grid};
            try {
                double dxg = op_norm(orbit_differential(f, x, p));
                double worst = 0;
                for (Vec2 w : ball) {
                    Vec2 y = x + w * (2 * eps);
                    for (int d = 0; d < kDirs; ++d) {
                        VPoly seg{{y, unit_from_angle(std::numbers::pi * d / kDirs)}};
                        VPoly q = jet_iterate(f, seg, p, order);
                        double fact = 1, scale = 1;
                        for (int s = 1; s <= order && s <= q.degree(); ++s) {
                            fact *= s;
                            scale *= 2 * eps;
                            worst = std::max(worst, scale * fact * norm(q.c[static_cast<std::size_t>(s)]) / (3 * eps * dxg));
                        }
                    }
                }
                jet[i] = worst;
                double jump = 0;
                for (int d = 0; d < kDirs; ++d) {
                    double a = std::numbers::pi * d / kDirs;
                    Mat2 Dx = orbit_differential(f, x, p);
                    double lv = std::log(norm(Dx * unit_from_angle(a))), ln = std::log(op_norm(Dx));
                    for (int e = 0; e < 8; ++e) {
                        Vec2 y = x + unit_from_angle(std::numbers::pi * e / 4) * (0.99 * eps);
                        Mat2 Dy = orbit_differential(f, y, p);
                        jump = std::max(jump, std::abs(std::log(op_norm(Dy)) - ln));
                        for (double da : {-0.99 * eps, 0.0, 0.99 * eps})
                            jump = std::max(jump, std::abs(std::log(norm(Dy * unit_from_angle(a + da))) - lv));
                    }
                }
                cont[i] = jump;
            } catch (const EscapeError&) {
                // Orbits leaving a planar box carry no constraint.
            }
        });
        double wj = *std::max_element(jet.begin(), jet.end()), wc = *std::max_element(cont.begin(), cont.end());
        if (wj <= 1 && wc < 1) {
            out.eps = eps;
            out.ladder_index = j;
            out.jet_ratio = wj;
            out.continuity = wc;
            return out;
        }
    }
}

Label point_label(const SurfaceMap& f, int p, Vec2 y, Vec2 v) {
    Mat2 D = orbit_differential(f, y, p);
    Vec2 u = v * (1 / norm(v));
    // floor with a rounding allowance at integers
    auto fl = [](double v) { return static_cast<int>(std::floor(v + 1e-12)); };
    return {fl(std::log(op_norm(D))), fl(std::log(norm(D * u)))};
}

std::vector<Label> label_sequence(const SurfaceMap& f, int p, const CurveJet& sigma, double t, int m) {
    std::vector<Label> out;
    out.reserve(static_cast<std::size_t>(m));
    Tangent tg{f.normalize(sigma.eval(t)), sigma.derivative(t)};
    for (int i = 0; i < m; ++i) {
        tg.v = tg.v * (1 / norm(tg.v));
        out.push_back(point_label(f, p, tg.y, tg.v));
        tg = push_tangent(f, tg, p);
    }
    return out;
}

CurveJet level_curve(const SurfaceMap& f, int steps, const CurveJet& sigma, const AffineMap& theta, double* rel_remainder) {
    CurveJet c = compose(sigma, theta);
    if (steps == 0) {
        if (rel_remainder) *rel_remainder = 0;
        return c;
    }
    std::vector<CurvePiece> ps;
    double rem = 0;
    for (const auto& pc : c.pieces()) {
        VPoly q = jet_iterate(f, pc.p, steps, c.order());
        double r = jet_remainder(f, pc.p, q, steps);
        rem = std::max(rem, r / std::max(poly::sup_norm(q, 1), 1e-300));
        ps.push_back({pc.lo, pc.hi, std::move(q), r});
    }
    align(f, ps);
    if (rel_remainder) *rel_remainder = rem;
    return CurveJet(std::move(ps), c.order());
}

std::vector<Label> RepTree::path(std::size_t node) const {
    std::vector<Label> out;
    for (std::int64_t i = static_cast<std::int64_t>(node); i >= 0 && nodes[static_cast<std::size_t>(i)].parent >= 0;
         i = nodes[static_cast<std::size_t>(i)].parent)
        out.push_back(nodes[static_cast<std::size_t>(i)].label);
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> RepTree::covering(int n, double t, const std::vector<Label>& labels) const {
    if (n < 0 || n > depth) throw DomainError("RepTree::covering: level out of range");
    if (static_cast<int>(labels.size()) < n) throw DomainError("RepTree::covering: label sequence too short");
    // A covering child lies inside the core of a covering parent with the same path prefix.
    std::vector<std::size_t> frontier{0};
    for (int l = 1; l <= n && !frontier.empty(); ++l) {
        std::vector<std::size_t> next;
        for (std::size_t i : frontier) {
            const auto& nd = nodes[i];
            for (int c = 0; c < nd.children; ++c) {
                std::size_t j = static_cast<std::size_t>(nd.first_child + c);
                if (nodes[j].label == labels[static_cast<std::size_t>(l - 1)] && nodes[j].covers(t)) next.push_back(j);
            }
        }
        frontier = std::move(next);
    }
    return frontier;
}

namespace {

struct Interval {
    double lo, hi;
};

bool meets(const std::vector<Interval>& set, double a, double b) {
    for (const auto& I : set)
        if (std::max(a, I.lo) <= std::min(b, I.hi)) return true;
    return false;
}

struct ExpandCtx {
    const SurfaceMap& f;
    int p;
    const CurveJet& sigma;
    double eps;
    int r;
    double valence_constant;
    int grid;
};

struct ExpandStats {
    std::size_t pruned = 0;
    int max_split = 1;
    double remainder = 0;
    double red_ratio = 0, blue_ratio = 0;
    int violations = 0;
};

using LabelSets = std::map<Label, std::vector<Interval>>;

// Parameter sets, in the coordinates of theta_hat, of points whose first n labels equal
// `path`, grouped by the label of step n + 1.
LabelSets label_sets(const ExpandCtx& ctx, const AffineMap& theta_hat, const std::vector<Label>& path, int n,
                     std::vector<std::pair<double, Label>>& labelled) {
    auto lab = [&](double s) -> std::optional<Label> {
        auto seq = label_sequence(ctx.f, ctx.p, ctx.sigma, theta_hat(s), n + 1);
        if (!std::equal(path.begin(), path.end(), seq.begin())) return std::nullopt;
        return seq[static_cast<std::size_t>(n)];
    };
    int G = ctx.grid;
    std::vector<double> s(static_cast<std::size_t>(G));
    std::vector<std::optional<Label>> l(static_cast<std::size_t>(G));
    for (int i = 0; i < G; ++i) {
        s[static_cast<std::size_t>(i)] = -1 + 2.0 * i / (G - 1);
        l[static_cast<std::size_t>(i)] = lab(s[static_cast<std::size_t>(i)]);
        if (l[static_cast<std::size_t>(i)]) labelled.push_back({s[static_cast<std::size_t>(i)], *l[static_cast<std::size_t>(i)]});
    }
    LabelSets out;
    auto add = [&](const std::optional<Label>& L, double a, double b) {
        if (!L || !(b >= a)) return;
        auto& v = out[*L];
        if (!v.empty() && v.back().hi >= a) v.back().hi = std::max(v.back().hi, b);
        else v.push_back({a, b});
    };
    for (int i = 0; i + 1 < G; ++i) {
        const auto& la = l[static_cast<std::size_t>(i)];
        const auto& lb = l[static_cast<std::size_t>(i + 1)];
        double a = s[static_cast<std::size_t>(i)], b = s[static_cast<std::size_t>(i + 1)];
        if (la == lb) {
            add(la, a, b);
            continue;
        }
        double x = a, y = b;
        for (int it = 0; it < 40; ++it) {
            double m = 0.5 * (x + y);
            if (lab(m) == la) x = m;
            else y = m;
        }
        add(la, a, x);
        add(lb, y, b);
    }
    if (G == 1) add(l[0], s[0], s[0]);
    return out;
}

// The children of `node` for label L. With `track` set only pieces containing that
// parameter (in theta_hat coordinates) are built.
void expand_label(const ExpandCtx& ctx, const RepTreeNode& node, const Label& L, const std::vector<Interval>* set,
                  const std::vector<double>& set_samples, std::optional<double> track, std::vector<RepTreeNode>& out,
                  ExpandStats& st) {
    const int n = node.level;
    const AffineMap theta_hat = node.red ? node.theta.after({0, 1.0 / 3}) : node.theta;
    if (theta_hat.rho < 1e-12)
        throw PreconditionError("reptree: parameter resolution exhausted below level " + std::to_string(n + 1));
    const double cap = node.red ? kRedRateCap : kBlueRateCap;
    const int steps_psi = n * ctx.p, steps_g = (n + 1) * ctx.p;
    auto keep_range = [&](double a, double b) {
        if (track) return *track >= a - 1e-9 && *track <= b + 1e-9;
        return meets(*set, a, b);
    };

    // First step: the widest dyadic rate b with a Taylor model of d(g o psi o theta) at 0.
    struct Cell {
        AffineMap theta;  // theta_hat coordinates
        VPoly P;
        double speed_psi;
    };
    std::vector<Cell> cells;
    double b = 1;
    for (int lvl = 0;; ++lvl, b *= 0.5) {
        if (lvl > 24) throw InvariantError("build_tree: no Taylor rate found for a label");
        cells.clear();
        bool ok = true;
        int count = static_cast<int>(std::lround(1 / b));
        for (int j = 0; j < count && ok; ++j) {
            AffineMap th{-1 + b * (2 * j + 1), b};
            if (!keep_range(th.lo(), th.hi())) continue;
            AffineMap Th = theta_hat.after(th);
            CurveJet psi = level_curve(ctx.f, steps_psi, ctx.sigma, Th);
            double sp = psi.sup_derivative(1);
            const auto& pc = ctx.sigma.pieces()[ctx.sigma.piece_index(Th(0))];
            VPoly local = pc.p.affine((Th(0) - pc.mid()) / pc.half(), Th.rho / pc.half());
            VPoly P = jet_iterate(ctx.f, local, steps_g, ctx.r).derivative(1);
            double err = 0;
            for (int i = 0; i <= 32; ++i) {
                double u = std::cos(std::numbers::pi * i / 32);
                Tangent tg = push_tangent(ctx.f, curve_tangent(ctx.f, ctx.sigma, Th, u), steps_g);
                err = std::max(err, norm(P.eval(u) - tg.v));
            }
            if (err > std::exp(L.kprime - 4.0) * sp) ok = false;
            else cells.push_back({th, std::move(P), sp});
        }
        if (ok) break;
    }

    int red_count = 0, blue_count = 0;
    const double split_cap = 1000 * ctx.valence_constant;
    for (const auto& cell : cells) {
        // Second step: the sublevel set |P| in [e^-3 a, e^3 a] as closed intervals.
        double a = std::exp(static_cast<double>(L.kprime)) * cell.speed_psi;
        poly::Poly N2 = cell.P.norm2();
        std::vector<double> cuts{-1, 1};
        for (double lev : {std::exp(-3.0) * a, std::exp(3.0) * a}) {
            poly::Poly q = N2;
            q[0] -= lev * lev;
            for (double z : poly::roots_in(q, -1, 1, 1e-12)) cuts.push_back(z);
        }
        std::sort(cuts.begin(), cuts.end());
        std::vector<Interval> J;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            double m = 0.5 * (cuts[i] + cuts[i + 1]);
            double v = norm(cell.P.eval(m));
            if (v < std::exp(-3.0) * a || v > std::exp(3.0) * a) continue;
            if (!J.empty() && J.back().hi >= cuts[i]) J.back().hi = cuts[i + 1];
            else J.push_back({cuts[i], cuts[i + 1]});
        }
        auto in_J = [&](double u) {
            for (const auto& I : J)
                if (u >= I.lo - 1e-9 && u <= I.hi + 1e-9) return true;
            return false;
        };
        std::vector<double> checks = set_samples;
        if (track) checks = {*track};
        for (double s : checks) {
            double u = cell.theta.inverse(s);
            if (u >= -1 && u <= 1 && !in_J(u))
                throw InvariantError("build_tree: a labelled point fell outside the Bezout intervals");
        }

        for (const auto& I : J) {
            if (!(I.hi > I.lo)) continue;
            // Third step: the coarsest dyadic cut with bounded images and step rates under the cap.
            struct Piece {
                AffineMap Th;
                CurveJet img;
                double speed;
            };
            std::vector<Piece> pieces;
            auto try_cut = [&](int N, std::vector<Piece>& out_pieces) {
                out_pieces.clear();
                double h = (I.hi - I.lo) / N;
                for (int l = 0; l < N; ++l) {
                    AffineMap sub{I.lo + h * (l + 0.5), 0.5 * h};
                    AffineMap th = cell.theta.after(sub);
                    if (!keep_range(th.lo(), th.hi())) continue;
                    AffineMap Th = theta_hat.after(th);
                    double rem = 0;
                    CurveJet img = level_curve(ctx.f, steps_g, ctx.sigma, Th, &rem);
                    st.remainder = std::max(st.remainder, rem);
                    auto bv = is_bounded(img);
                    if (!bv.ok) return false;
                    double rate = Th.rho / node.theta.rho;
                    if (bv.speed > ctx.eps) rate *= std::min(2.0 / 3.0, 2 * ctx.eps / (3 * bv.speed));
                    if (rate > cap * (1 + 1e-12)) return false;
                    out_pieces.push_back({Th, std::move(img), bv.speed});
                }
                return true;
            };
            // Doubling to the first admissible cut, then bisection back towards the coarsest one.
            int N = 1;
            while (!try_cut(N, pieces)) {
                N *= 2;
                if (N > split_cap) throw InvariantError("build_tree: third-step cut exceeds 1000 C_r");
            }
            int bad = N / 2;
            std::vector<Piece> trial;
            while (N - bad > 1) {
                int mid = (N + bad) / 2;
                if (try_cut(mid, trial)) {
                    N = mid;
                    pieces = std::move(trial);
                } else {
                    bad = mid;
                }
            }
            st.max_split = std::max(st.max_split, N);

            // Fourth step: eps-bounded pieces become blue children, the others go through subdivide_tech.
            for (const auto& pc : pieces) {
                auto emit = [&](const AffineMap& th, bool red, const CurveJet& c) {
                    double lo = red ? th(-1.0 / 3) : th.lo(), hi = red ? th(1.0 / 3) : th.hi();
                    if (!keep_range(theta_hat.inverse(lo), theta_hat.inverse(hi))) {
                        ++st.pruned;
                        return;
                    }
                    RepTreeNode ch;
                    ch.level = n + 1;
                    ch.red = red;
                    ch.theta = th;
                    ch.label = L;
                    ch.rate = th.rho / node.theta.rho;
                    ch.speed0 = norm(c.derivative(0));
                    ch.speed = c.sup_derivative(1);
                    if (ch.rate > cap * (1 + 1e-12)) throw InvariantError("build_tree: step-map rate above its cap");
                    if (!is_bounded(c).ok && is_bounded(c).margin < -1e-12 * ch.speed)
                        throw InvariantError("build_tree: node curve is not bounded");
                    if (ch.speed > ctx.eps * (1 + 1e-9)) throw InvariantError("build_tree: node curve speed exceeds eps");
                    if (red && ch.speed0 < ctx.eps / 6 * (1 - 1e-9))
                        throw InvariantError("build_tree: red node derivative below eps/6");
                    (red ? red_count : blue_count)++;
                    out.push_back(ch);
                };
                if (pc.speed <= ctx.eps) {
                    emit(pc.Th, false, pc.img);
                    continue;
                }
                TechResult tech = subdivide_tech(pc.img, ctx.eps);
                for (const auto& tp : tech.pieces) emit(pc.Th.after(tp.iota), tp.red, compose(pc.img, tp.iota));
            }
        }
    }

    if (!track) {
        double x = static_cast<double>(L.k - L.kprime) / (ctx.r - 1);
        double rr = red_count / std::exp(std::max(static_cast<double>(L.kprime), x));
        double br = blue_count / std::exp(x);
        st.red_ratio = std::max(st.red_ratio, rr);
        st.blue_ratio = std::max(st.blue_ratio, br);
        if (rr > ctx.valence_constant || br > ctx.valence_constant) ++st.violations;
    }
}

void expand_full(const ExpandCtx& ctx, const RepTreeNode& node, const std::vector<Label>& path, std::vector<RepTreeNode>& out,
                 ExpandStats& st) {
    const AffineMap theta_hat = node.red ? node.theta.after({0, 1.0 / 3}) : node.theta;
    std::vector<std::pair<double, Label>> labelled;
    LabelSets sets = label_sets(ctx, theta_hat, path, node.level, labelled);
    for (const auto& [L, set] : sets) {
        std::vector<double> samples;
        for (const auto& [s, l] : labelled)
            if (l == L) samples.push_back(s);
        expand_label(ctx, node, L, &set, samples, std::nullopt, out, st);
    }
}

}  // namespace

RepTree build_tree(const SurfaceMap& f, int p, const CurveJet& sigma, double eps, int depth, const TreeOptions& opt) {
    if (p < 1 || depth < 0) throw DomainError("build_tree: need p >= 1 and depth >= 0");
    if (!(eps > 0)) throw DomainError("build_tree: eps must be positive");
    if (!is_strongly_bounded(sigma, eps)) throw PreconditionError("build_tree: sigma is not strongly eps-bounded");
    RepTree tree;
    tree.map_spec = f.spec();
    tree.p = p;
    tree.eps = eps;
    tree.order = sigma.order();
    tree.sigma = sigma;
    RepTreeNode root;
    root.speed0 = norm(sigma.derivative(0));
    root.speed = sigma.sup_derivative(1);
    tree.nodes.push_back(root);
    tree.level_begin = {0, 1};
    ExpandCtx ctx{f, p, sigma, eps, sigma.order(), opt.valence_constant, opt.label_grid};

    for (int n = 0; n < depth; ++n) {
        std::size_t b = tree.level_begin[static_cast<std::size_t>(n)], e = tree.level_begin[static_cast<std::size_t>(n) + 1];
        std::vector<std::vector<RepTreeNode>> kids(e - b);
        std::vector<ExpandStats> stats(e - b);
        parallel_for(e - b, [&](std::size_t i) { expand_full(ctx, tree.nodes[b + i], tree.path(b + i), kids[i], stats[i]); });
        std::size_t total = 0;
        for (const auto& k : kids) total += k.size();
        if (tree.nodes.size() + total > opt.max_nodes) {
            tree.truncated = true;
            break;
        }
        for (std::size_t i = 0; i < kids.size(); ++i) {
            auto& parent = tree.nodes[b + i];
            parent.first_child = static_cast<std::int64_t>(tree.nodes.size());
            parent.children = static_cast<int>(kids[i].size());
            for (auto& c : kids[i]) {
                c.parent = static_cast<std::int64_t>(b + i);
                tree.nodes.push_back(c);
            }
            const auto& s = stats[i];
            tree.pruned += s.pruned;
            tree.max_split = std::max(tree.max_split, s.max_split);
            tree.worst_remainder = std::max(tree.worst_remainder, s.remainder);
            tree.valence.red_ratio = std::max(tree.valence.red_ratio, s.red_ratio);
            tree.valence.blue_ratio = std::max(tree.valence.blue_ratio, s.blue_ratio);
            tree.valence.violations += s.violations;
        }
        tree.level_begin.push_back(tree.nodes.size());
        tree.depth = n + 1;
    }
    return tree;
}

CoverageReport check_coverage(const SurfaceMap& f, const RepTree& tree, int samples) {
    if (samples < 1) throw DomainError("check_coverage: need at least one sample");
    CoverageReport rep;
    rep.samples = samples;
    std::vector<int> miss(static_cast<std::size_t>(samples), -1);
    parallel_for(static_cast<std::size_t>(samples), [&](std::size_t i) {
        double t = -1 + (2.0 * static_cast<double>(i) + 1) / samples;
        auto labels = label_sequence(f, tree.p, tree.sigma, t, tree.depth);
        // covering() descends level by level, so the deepest level decides.
        for (int n = 1; n <= tree.depth; ++n)
            if (tree.covering(n, t, labels).empty()) {
                miss[i] = n;
                return;
            }
    });
    for (int i = 0; i < samples; ++i) {
        if (miss[static_cast<std::size_t>(i)] < 0) {
            ++rep.covered;
        } else if (rep.miss_level < 0) {
            rep.miss_level = miss[static_cast<std::size_t>(i)];
            rep.miss_t = -1 + (2.0 * i + 1) / samples;
        }
    }
    return rep;
}

LeafBoundReport leaf_bound_check(const RepTree& tree) {
    LeafBoundReport rep;
    if (tree.depth == 0) return rep;
    std::map<std::vector<Label>, std::size_t> counts;
    for (std::size_t i = tree.level_begin[static_cast<std::size_t>(tree.depth)]; i < tree.nodes.size(); ++i) ++counts[tree.path(i)];
    rep.sequences = counts.size();
    for (const auto& [seq, c] : counts) {
        double log_bound = 0;
        for (const auto& L : seq)
            log_bound += std::max(static_cast<double>(L.kprime), static_cast<double>(L.k - L.kprime) / (tree.order - 1));
        // Per-step constant: red and blue children together obey 2 C_r e^max(...).
        double per_step = std::exp((std::log(static_cast<double>(c)) - log_bound) / tree.depth);
        rep.worst_ratio = std::max(rep.worst_ratio, per_step);
        if (per_step > 2 * kValenceConstant) ++rep.violations;
    }
    return rep;
}

double geometric_alpha(const SurfaceMap& f, int p) {
    if (p < 1) throw DomainError("geometric_alpha: p must be positive");
    constexpr int kGrid = 16;
    Vec2 lo = f.box_lo(), hi = f.box_hi();
    double L = 1;
    for (int ix = 0; ix < kGrid; ++ix)
        for (int iy = 0; iy < kGrid; ++iy) {
            Vec2 x{lo.x + (hi.x - lo.x) * (ix + 0.5) / kGrid, lo.y + (hi.y - lo.y) * (iy + 0.5) / kGrid};
            try {
                Mat2 D = Mat2::identity();
                for (int j = 0; j + 1 < p; ++j) {
                    D = f.differential(x) * D;
                    x = f.forward(x);
                    L = std::max(L, op_norm(D));
                }
            } catch (const EscapeError&) {
            }
        }
    // Speed eps/9 at a core point, a 2/3 window around it, and 1/L for the steps inside a period.
    return 4.0 / (81.0 * L);
}

namespace {

GeometricSet finish_geometric_set(const SurfaceMap& f, const CurveJet& sigma, int p, double eps, double t, IntegerSet E) {
    GeometricSet gs;
    gs.t = t;
    gs.x = f.normalize(sigma.eval(t));
    gs.p = p;
    gs.eps = eps;
    gs.alpha = geometric_alpha(f, p);
    gs.tau = std::log(10.0) / p;
    gs.E = std::move(E);
    for (std::int64_t n : gs.E.elements()) {
        auto cert = geometric_time_certificate(f, sigma, t, static_cast<int>(n), gs.alpha, eps);
        if (!cert.ok) throw InvariantError("geometric_set: time " + std::to_string(n) + " fails the geometric certificate");
        ++gs.certified;
    }
    gs.largeness_margin = std::numeric_limits<double>::infinity();
    if (gs.E.size() >= 2) {
        StepFn<ProjectivePoint> step = [&f](const ProjectivePoint& q) { return project_step(f, q).next; };
        auto Phi = SubadditiveProcess<ProjectivePoint>::from_generator(
            [&f](const ProjectivePoint& q) { return project_step(f, q).value.phi; }, step);
        ProjectivePoint x0 = ProjectivePoint::make(gs.x, sigma.derivative(t));
        auto rep = largeness_check(x0, gs.E, Phi, gs.tau, step);
        gs.largeness_margin = rep.margin;
        if (!rep.ok)
            throw InvariantError("geometric_set: largeness fails between " + std::to_string(rep.worst_k) + " and " +
                                 std::to_string(rep.worst_l));
    }
    return gs;
}

}  // namespace

GeometricSet geometric_set(const SurfaceMap& f, const RepTree& tree, double t) {
    if (t < -1 || t > 1) throw DomainError("geometric_set: t outside [-1, 1]");
    auto labels = label_sequence(f, tree.p, tree.sigma, t, tree.depth);
    std::vector<std::int64_t> E;
    std::vector<std::size_t> frontier{0};
    for (int n = 1; n <= tree.depth; ++n) {
        std::vector<std::size_t> next;
        bool red = false;
        for (std::size_t i : frontier) {
            const auto& nd = tree.nodes[i];
            for (int c = 0; c < nd.children; ++c) {
                std::size_t j = static_cast<std::size_t>(nd.first_child + c);
                const auto& ch = tree.nodes[j];
                if (ch.label == labels[static_cast<std::size_t>(n - 1)] && ch.covers(t)) {
                    next.push_back(j);
                    red = red || ch.red;
                }
            }
        }
        if (next.empty()) throw PreconditionError("geometric_set: x is not covered at level " + std::to_string(n));
        if (red) E.push_back(static_cast<std::int64_t>(n) * tree.p);
        frontier = std::move(next);
    }
    return finish_geometric_set(f, tree.sigma, tree.p, tree.eps, t,
                                IntegerSet(std::move(E), std::max<std::int64_t>(1, static_cast<std::int64_t>(tree.depth) * tree.p)));
}

BranchResult follow_branch(const SurfaceMap& f, int p, const CurveJet& sigma, double eps, double t, int depth) {
    if (p < 1 || depth < 0) throw DomainError("follow_branch: need p >= 1 and depth >= 0");
    if (t < -1 || t > 1) throw DomainError("follow_branch: t outside [-1, 1]");
    if (!is_strongly_bounded(sigma, eps)) throw PreconditionError("follow_branch: sigma is not strongly eps-bounded");
    ExpandCtx ctx{f, p, sigma, eps, sigma.order(), kValenceConstant, 0};
    BranchResult br;
    RepTreeNode node;
    node.speed0 = norm(sigma.derivative(0));
    node.speed = sigma.sup_derivative(1);
    br.path.push_back(node);
    auto labels = label_sequence(f, p, sigma, t, depth);
    std::vector<std::int64_t> E;
    for (int n = 0; n < depth; ++n) {
        const AffineMap theta_hat = node.red ? node.theta.after({0, 1.0 / 3}) : node.theta;
        std::vector<RepTreeNode> kids;
        ExpandStats st;
        expand_label(ctx, node, labels[static_cast<std::size_t>(n)], nullptr, {}, std::clamp(theta_hat.inverse(t), -1.0, 1.0), kids, st);
        // Rounding in theta_hat coordinates is tolerated at the same 1e-9 level as the Bezout check.
        const double slack = 1e-9 * theta_hat.rho + 1e-14;
        const RepTreeNode* pick = nullptr;
        double pick_gap = 0;
        for (const auto& k : kids) {
            double gap = std::max({0.0, k.core_lo() - t, t - k.core_hi()});
            if (gap > slack) continue;
            if (!pick || (k.red && !pick->red) || (k.red == pick->red && gap < pick_gap)) {
                pick = &k;
                pick_gap = gap;
            }
        }
        if (!pick) throw InvariantError("follow_branch: no child covers x at level " + std::to_string(n + 1));
        node = *pick;
        br.path.push_back(node);
        if (node.red) E.push_back(static_cast<std::int64_t>(n + 1) * p);
    }
    br.depth = depth;
    br.p = p;
    br.E = IntegerSet(std::move(E), std::max<std::int64_t>(1, static_cast<std::int64_t>(depth) * p));
    return br;
}

GeometricSet geometric_set_branch(const SurfaceMap& f, const BranchResult& br, const CurveJet& sigma, double eps, double t) {
    return finish_geometric_set(f, sigma, br.p, eps, t, br.E);
}

LebgeoTable lebgeo_diagnostic(const SurfaceMap& f, const CurveJet& sigma, int p, double eps, double b, double beta,
                              const std::vector<std::int64_t>& n_list, int samples) {
    if (n_list.empty() || samples < 1) throw DomainError("lebgeo_diagnostic: need n values and samples");
    std::int64_t nmax = *std::max_element(n_list.begin(), n_list.end());
    int depth = static_cast<int>((nmax + p - 1) / p);
    std::vector<double> weight(static_cast<std::size_t>(samples));
    std::vector<std::vector<char>> hit(static_cast<std::size_t>(samples), std::vector<char>(n_list.size(), 0));
    parallel_for(static_cast<std::size_t>(samples), [&](std::size_t i) {
        double t = -1 + (2.0 * static_cast<double>(i) + 1) / samples;
        weight[i] = norm(sigma.derivative(t));
        BranchResult br = follow_branch(f, p, sigma, eps, t, depth);
        std::vector<double> log_stretch(static_cast<std::size_t>(nmax) + 1, 0);
        Tangent tg{f.normalize(sigma.eval(t)), sigma.derivative(t) * (1 / norm(sigma.derivative(t)))};
        double acc = 0;
        for (std::int64_t k = 1; k <= nmax; ++k) {
            tg = push_tangent(f, tg, 1);
            double s = norm(tg.v);
            acc += std::log(s);
            tg.v = tg.v * (1 / s);
            log_stretch[static_cast<std::size_t>(k)] = acc;
        }
        for (std::size_t j = 0; j < n_list.size(); ++j) {
            std::int64_t n = n_list[j];
            double d = static_cast<double>(br.E.count_upto(n)) / static_cast<double>(n);
            hit[i][j] = d < beta && log_stretch[static_cast<std::size_t>(n)] >= static_cast<double>(n) * b;
        }
    });
    double W = 0;
    for (double w : weight) W += w;
    LebgeoTable tab;
    for (std::size_t j = 0; j < n_list.size(); ++j) {
        LebgeoRow row;
        row.n = n_list[j];
        double m = 0;
        for (std::size_t i = 0; i < weight.size(); ++i)
            if (hit[i][j]) {
                m += weight[i];
                ++row.count;
            }
        row.fraction = W > 0 ? m / W : 0;
        tab.rows.push_back(row);
    }
    for (std::size_t j = static_cast<std::size_t>(tab.burn_in) + 1; j < tab.rows.size(); ++j)
        if (tab.rows[j].fraction > tab.rows[j - 1].fraction + 1.0 / samples) tab.nonincreasing = false;
    std::vector<std::pair<double, double>> pts;
    for (const auto& row : tab.rows)
        if (row.fraction > 0) pts.push_back({static_cast<double>(row.n), std::log(row.fraction)});
    if (pts.size() >= 2) {
        double mx = 0, my = 0;
        for (auto [x, y] : pts) {
            mx += x;
            my += y;
        }
        mx /= static_cast<double>(pts.size());
        my /= static_cast<double>(pts.size());
        double sxy = 0, sxx = 0;
        for (auto [x, y] : pts) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
        }
        tab.log_slope = sxx > 0 ? sxy / sxx : 0;
    }
    return tab;
}

BallCover cover_dynamical_ball(const SurfaceMap& f, const CurveJet& sigma, double t_x, int q, int n, double eps) {
    if (q < 1 || n < 1 || !(eps > 0)) throw DomainError("cover_dynamical_ball: need q, n >= 1 and eps > 0");
    if (t_x < -1 || t_x > 1) throw DomainError("cover_dynamical_ball: t_x outside [-1, 1]");
    if (!is_strongly_bounded(sigma, eps)) throw PreconditionError("cover_dynamical_ball: sigma is not strongly eps-bounded");
    std::vector<Vec2> xs{f.normalize(sigma.eval(t_x))};
    for (int k = 0; k < n; ++k) xs.push_back(f.forward(xs.back()));

    // Lower bound on the distance from f^k o sigma o theta to f^k x.
    auto misses = [&](const CurveJet& c, int k) {
        Vec2 x = xs[static_cast<std::size_t>(k)];
        Vec2 c0 = c.eval(0);
        Vec2 x_lift = c0 + f.displacement(c0, x);
        double d2 = std::numeric_limits<double>::infinity();
        for (const auto& pc : c.pieces()) {
            VPoly sh = pc.p;
            sh.c[0] -= x_lift;
            d2 = std::min(d2, poly::min_on(sh.norm2(), -1, 1));
        }
        return std::sqrt(std::max(0.0, d2)) >= eps;
    };

    std::vector<AffineMap> cur{{0, 1}};
    if (misses(sigma, 0)) throw InvariantError("cover_dynamical_ball: x is not on sigma");
    for (int k = 1; k <= n; ++k) {
        std::vector<AffineMap> next;
        std::vector<AffineMap> work(cur.rbegin(), cur.rend());
        while (!work.empty()) {
            AffineMap th = work.back();
            work.pop_back();
            CurveJet c = level_curve(f, k, sigma, th);
            auto bv = is_bounded(c);
            if (!bv.ok) {
                if (th.rho < 1e-14) throw InvariantError("cover_dynamical_ball: refinement floor reached");
                work.push_back(th.after({0.5, 0.5}));
                work.push_back(th.after({-0.5, 0.5}));
                continue;
            }
            if (bv.speed <= eps) {
                if (k == n || !misses(c, k)) next.push_back(th);
                continue;
            }
            // Equal disjoint cuts with speed at most eps; rates <= 1/2 keep them bounded.
            int m = std::max(2, static_cast<int>(std::ceil(bv.speed / eps)));
            for (int j = 0; j < m; ++j) {
                AffineMap cut{-1 + (2.0 * j + 1) / m, 1.0 / m};
                CurveJet sub = compose(c, cut);
                if (k == n || !misses(sub, k)) next.push_back(th.after(cut));
            }
        }
        std::sort(next.begin(), next.end(), [](const AffineMap& a, const AffineMap& b) { return a.lo() < b.lo(); });
        cur = std::move(next);
        if (cur.empty()) throw InvariantError("cover_dynamical_ball: the piece through x was dropped");
    }

    BallCover out;
    out.pieces = cur;
    out.count = cur.size();
    ProjectivePoint xh = ProjectivePoint::make(xs[0], sigma.derivative(t_x));
    for (int k = 0; k < n; ++k) {
        out.omega += omega_q(f, xh, q);
        xh = project_step(f, xh).next;
    }
    out.cr = kCoverRate;
    out.bq = kCoverConstant;
    out.bound = out.bq * std::pow(out.cr, static_cast<double>(n) / q) * std::exp(out.omega / (sigma.order() - 1));

    // Ball membership by orbit on a parameter grid refined around the union of the pieces.
    double lo = cur.front().lo(), hi = lo;
    for (const auto& th : cur) hi = std::max(hi, th.hi());
    double w = std::max(hi - lo, 1e-12);
    double a = std::max(-1.0, lo - w), bnd = std::min(1.0, hi + w);
    constexpr int kSamples = 2001;
    int inside = 0, total = 0;
    for (int i = 0; i < kSamples; ++i) {
        double s = a + (bnd - a) * i / (kSamples - 1);
        Vec2 y = f.normalize(sigma.eval(s));
        bool in_ball = true;
        for (int k = 0; k < n && in_ball; ++k) {
            if (f.distance(y, xs[static_cast<std::size_t>(k)]) >= eps) in_ball = false;
            y = f.forward(y);
        }
        if (!in_ball) continue;
        ++total;
        for (const auto& th : cur)
            if (s >= th.lo() - 1e-12 && s <= th.hi() + 1e-12) {
                ++inside;
                break;
            }
    }
    out.contained = total > 0 ? static_cast<double>(inside) / total : 1;
    return out;
}

}  // namespace srblab
