#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <random>
#include <vector>

#include "diffsym/geometry.hpp"
#include "diffsym/parser.hpp"

using namespace diffsym;

namespace {

const CoordinateSystem& cs1() {
    static CoordinateSystem cs({"x"});
    return cs;
}

const CoordinateSystem& cs2() {
    static CoordinateSystem cs({"x", "y"});
    return cs;
}

Expr P(const std::string& s, const CoordinateSystem& cs = cs1()) { return parse_expr(s, cs); }

// heat-type operator d_xx + d_t, standard by construction
Diffusor bm1() {
    SymExprMatrix a(1);
    a.set(0, 0, constant(1));
    return Diffusor::standard(cs1(), a, {constant(0)});
}

Expr rand_poly(std::mt19937& rng, const CoordinateSystem& cs, int terms = 3) {
    auto pick = [&](int n) { return static_cast<int>(rng() % n); };
    Expr acc = constant(Rational(pick(5) - 2));
    for (int i = 0; i < terms; ++i) {
        Expr term = constant(Rational(pick(7) - 3, 1 + pick(2)));
        int factors = 1 + pick(2);
        for (int f = 0; f < factors; ++f) {
            Expr v = variable(cs.name(rng() % cs.size()));
            term = term * (pick(3) == 0 ? pow(v, Rational(2)) : v);
        }
        acc = acc + term;
    }
    return acc;
}

std::vector<Expr> rand_components(std::mt19937& rng, const CoordinateSystem& cs, int terms = 2) {
    std::vector<Expr> comp;
    for (std::size_t i = 0; i < cs.size(); ++i) comp.push_back(rand_poly(rng, cs, terms));
    return comp;
}

ProjectableVectorField rand_projectable(std::mt19937& rng, const CoordinateSystem& cs) {
    auto pick = [&](int n) { return static_cast<int>(rng() % n); };
    std::vector<Expr> phi;
    for (std::size_t i = 0; i < cs.dim(); ++i) phi.push_back(rand_poly(rng, cs, 2));
    Expr t = variable(cs.time());
    Expr tau = constant(Rational(pick(5) - 2)) + constant(Rational(pick(3))) * t +
               constant(Rational(pick(3) - 1, 2)) * t * t;
    return ProjectableVectorField(cs, phi, tau);
}

Diffusor rand_diffusor(std::mt19937& rng, const CoordinateSystem& cs) {
    std::size_t n = cs.size();
    SymExprMatrix a(n);
    std::vector<Expr> b(n);
    for (std::size_t i = 0; i < n; ++i) {
        b[i] = rand_poly(rng, cs, 2);
        for (std::size_t j = i; j < n; ++j) a.set(i, j, rand_poly(rng, cs, 2));
    }
    return Diffusor(cs, a, b);
}

Diffusor rand_standard_diffusor(std::mt19937& rng, const CoordinateSystem& cs) {
    std::size_t m = cs.dim();
    SymExprMatrix a(m);
    std::vector<Expr> b(m);
    for (std::size_t i = 0; i < m; ++i) {
        b[i] = rand_poly(rng, cs, 2);
        for (std::size_t j = i; j < m; ++j) a.set(i, j, rand_poly(rng, cs, 2));
    }
    return Diffusor::standard(cs, a, b);
}

Codiffusor rand_codiffusor(std::mt19937& rng, const CoordinateSystem& cs) {
    std::size_t n = cs.size();
    std::vector<Expr> first(n);
    SymExprMatrix second(n);
    for (std::size_t i = 0; i < n; ++i) {
        first[i] = rand_poly(rng, cs, 2);
        for (std::size_t j = i; j < n; ++j) second.set(i, j, rand_poly(rng, cs, 2));
    }
    return Codiffusor(cs, first, second);
}

// triangular affine-plus-lower-terms map with an exact inverse supplied
Diffeomorphism rand_diffeo(std::mt19937& rng, const CoordinateSystem& cs) {
    auto pick = [&](int n) { return static_cast<int>(rng() % n); };
    const Rational scales[] = {Rational(1), Rational(2), Rational(1, 2)};
    Expr t = variable(cs.time());
    Rational al = scales[pick(3)];
    Rational be = Rational(pick(3) - 1);
    Expr f = constant(al) * t + constant(be);
    Expr finv = (t - constant(be)) / constant(al);
    std::map<std::string, Expr> inv_so_far{{cs.time(), finv}};
    std::vector<Expr> phi, phinv;
    for (std::size_t i = 0; i < cs.dim(); ++i) {
        Rational a = scales[pick(3)] * Rational(pick(2) ? 1 : -1);
        Expr xi = variable(cs.name(i + 1));
        Expr p = constant(Rational(pick(3) - 1)) + constant(Rational(pick(3) - 1)) * t;
        if (i > 0 && pick(2)) {
            Expr prev = variable(cs.name(i));
            p = p + constant(Rational(pick(3) - 1)) * prev * (pick(2) ? t : constant(1));
        }
        phi.push_back(constant(a) * xi + p);
        Expr xinv = (xi - substitute(p, inv_so_far)) / constant(a);
        phinv.push_back(xinv);
        inv_so_far[cs.name(i + 1)] = xinv;
    }
    return Diffeomorphism(cs, cs, f, phi, finv, phinv);
}

std::vector<Expr> gradient(const Expr& g, const CoordinateSystem& cs) {
    std::vector<Expr> out;
    for (const auto& v : cs.names()) out.push_back(diff(g, v));
    return out;
}

void check_exact_zero(const Expr& e) {
    ZeroResult z = is_zero_detail(e);
    REQUIRE(z.zero);
    REQUIRE_FALSE(z.probabilistic);
}

}  // namespace

TEST_CASE("second differentials and pairing") {
    Codiffusor d2 = second_differential(P("x^2"), cs1());
    CHECK(is_zero(d2.first(0)));
    CHECK(is_zero(d2.first(1) - P("2*x")));
    CHECK(is_zero(d2.second(1, 1) - P("2")));
    CHECK(is_zero(d2.second(0, 0)));
    CHECK(is_zero(d2.second(0, 1)));

    Codiffusor d2tx = second_differential(P("t*x"), cs1());
    CHECK(is_zero(d2tx.first(0) - P("x")));
    CHECK(is_zero(d2tx.first(1) - P("t")));
    CHECK(is_zero(d2tx.second(0, 1) - P("1")));
    CHECK(is_zero(d2tx.second(1, 1)));

    SECTION("pairing against the time differential picks out the time drift") {
        Codiffusor d2t = second_differential(P("t"), cs1());
        CHECK(is_zero(pair(d2t, bm1()) - P("1")));
        std::mt19937 rng(11);
        for (int i = 0; i < 10; ++i) {
            check_exact_zero(pair(d2t, rand_standard_diffusor(rng, cs1())) - P("1"));
            Codiffusor d2t2 = second_differential(variable(cs2().time()), cs2());
            check_exact_zero(pair(d2t2, rand_standard_diffusor(rng, cs2())) - constant(1));
        }
    }

    SECTION("applying a diffusor is pairing with the second differential") {
        CHECK(is_zero(apply_diffusor(bm1(), P("x^2")) - P("2")));
        CHECK(is_zero(apply_diffusor(bm1(), P("t*x^2")) - P("x^2 + 2*t")));
        CHECK(is_zero(apply_diffusor(bm1(), P("exp(x)")) - P("exp(x)")));
    }

    SECTION("mixed second-order coefficients count with both index orders") {
        // quarter in each off-diagonal slot assembles d_tx exactly
        SymExprMatrix a(2);
        a.set(0, 1, constant(Rational(1, 2)));
        Diffusor mixed(cs1(), a, {constant(0), constant(0)});
        CHECK(is_zero(apply_diffusor(mixed, P("t*x")) - P("1")));
    }
}

TEST_CASE("one-form products") {
    std::vector<Expr> dx{constant(0), constant(1)};
    std::vector<Expr> dt{constant(1), constant(0)};

    Codiffusor dxdt = one_form_product(dx, dt, cs1());
    CHECK(is_zero(dxdt.second(0, 1) - constant(Rational(1, 2))));
    CHECK(is_zero(dxdt.second(0, 0)));
    CHECK(is_zero(dxdt.second(1, 1)));
    CHECK(is_zero(dxdt.first(0)));
    CHECK(is_zero(dxdt.first(1)));

    std::vector<Expr> xdx{constant(0), P("x")};
    Codiffusor xdxdt = one_form_product(xdx, dt, cs1());
    CHECK(is_zero(xdxdt.second(0, 1) - P("x/2")));

    Codiffusor dxdx = one_form_product(dx, dx, cs1());
    CHECK(is_zero(dxdx.second(1, 1) - constant(1)));

    SECTION("product rule through gradients") {
        std::mt19937 rng(23);
        for (int i = 0; i < 20; ++i) {
            const CoordinateSystem& cs = (i % 2) ? cs2() : cs1();
            Expr g = rand_poly(rng, cs), h = rand_poly(rng, cs);
            std::vector<Expr> gam = rand_components(rng, cs);
            Codiffusor lhs = one_form_product(gradient(g * h, cs), gam, cs);
            Codiffusor rhs = g * one_form_product(gradient(h, cs), gam, cs) +
                             h * one_form_product(gradient(g, cs), gam, cs);
            REQUIRE(codiffusor_is_zero(lhs - rhs));
        }
    }
}

TEST_CASE("diffusors from pairs of vector fields") {
    VectorField ddx(cs1(), {P("0"), P("1")});
    VectorField xddx(cs1(), {P("0"), P("x")});

    Diffusor l1 = diffusor_from_fields(ddx, ddx);
    CHECK(is_zero(l1.a(1, 1) - constant(1)));
    CHECK(is_zero(l1.b(1)));
    CHECK(is_zero(l1.b(0)));

    Diffusor l2 = diffusor_from_fields(ddx, xddx);
    CHECK(is_zero(l2.a(1, 1) - P("x")));
    CHECK(is_zero(l2.b(1) - P("1")));

    SECTION("antisymmetrised composition is the bracket's first-order operator") {
        std::mt19937 rng(31);
        for (int i = 0; i < 25; ++i) {
            const CoordinateSystem& cs = (i % 2) ? cs2() : cs1();
            VectorField x(cs, rand_components(rng, cs));
            VectorField y(cs, rand_components(rng, cs));
            Diffusor diffb = diffusor_from_fields(x, y) - diffusor_from_fields(y, x);
            VectorField br = bracket(x, y);
            Diffusor first_order(cs, SymExprMatrix(cs.size()), br.comp);
            REQUIRE(diffusor_is_zero(diffb - first_order));
        }
    }
}

TEST_CASE("lie derivatives of diffusors") {
    Diffusor l = bm1();

    SECTION("scaling field rescales the heat operator") {
        ProjectableVectorField x(cs1(), {P("x")}, P("2*t"));
        Diffusor lx = lie_derivative_diffusor(x, l);
        CHECK(is_zero(lx.a(1, 1) + constant(2)));
        CHECK(is_zero(lx.b(0) + constant(2)));
        CHECK(is_zero(lx.b(1)));
        CHECK(is_zero(lx.a(0, 0)));
        CHECK(is_zero(lx.a(0, 1)));
        CHECK(diffusor_is_zero(lx + constant(2) * l));
    }

    SECTION("galilean field tilts the drift") {
        ProjectableVectorField x(cs1(), {P("t")}, P("0"));
        Diffusor lx = lie_derivative_diffusor(x, l);
        CHECK(is_zero(lx.b(1) + constant(1)));
        CHECK(is_zero(lx.b(0)));
        CHECK(is_zero(lx.a(1, 1)));
    }

    SECTION("translations leave the heat operator alone") {
        CHECK(diffusor_is_zero(
            lie_derivative_diffusor(ProjectableVectorField(cs1(), {P("1")}, P("0")), l)));
        CHECK(diffusor_is_zero(
            lie_derivative_diffusor(ProjectableVectorField(cs1(), {P("0")}, P("1")), l)));
    }

    SECTION("commutator with the field reproduces the lie derivative on functions") {
        std::mt19937 rng(47);
        for (int i = 0; i < 30; ++i) {
            const CoordinateSystem& cs = (i % 3) ? cs1() : cs2();
            ProjectableVectorField x = rand_projectable(rng, cs);
            Diffusor ld = rand_diffusor(rng, cs);
            Expr g = rand_poly(rng, cs);
            Expr lhs = apply_diffusor(lie_derivative_diffusor(x, ld), g);
            Expr rhs = lie_derivative_function(x, apply_diffusor(ld, g)) -
                       apply_diffusor(ld, lie_derivative_function(x, g));
            check_exact_zero(lhs - rhs);
        }
    }

    SECTION("product rule in the function slot") {
        std::mt19937 rng(53);
        for (int i = 0; i < 15; ++i) {
            const CoordinateSystem& cs = (i % 3) ? cs1() : cs2();
            ProjectableVectorField x = rand_projectable(rng, cs);
            Diffusor ld = rand_diffusor(rng, cs);
            Expr f = rand_poly(rng, cs);
            Diffusor lhs = lie_derivative_diffusor(x, f * ld);
            Diffusor rhs = lie_derivative_function(x, f) * ld + f * lie_derivative_diffusor(x, ld);
            REQUIRE(diffusor_is_zero(lhs - rhs));
        }
    }

    SECTION("derivative of a field-pair operator splits over the bracket") {
        std::mt19937 rng(59);
        for (int i = 0; i < 15; ++i) {
            const CoordinateSystem& cs = (i % 3) ? cs1() : cs2();
            ProjectableVectorField x = rand_projectable(rng, cs);
            VectorField xf = x.as_vector_field();
            VectorField y1(cs, rand_components(rng, cs));
            VectorField y2(cs, rand_components(rng, cs));
            Diffusor lhs = lie_derivative_diffusor(x, diffusor_from_fields(y1, y2));
            Diffusor rhs = diffusor_from_fields(bracket(xf, y1), y2) +
                           diffusor_from_fields(y1, bracket(xf, y2));
            REQUIRE(diffusor_is_zero(lhs - rhs));
        }
    }
}

TEST_CASE("lie derivatives of codiffusors") {
    SECTION("scaling doubles the quadratic form") {
        ProjectableVectorField x(cs1(), {P("x")}, P("0"));
        std::vector<Expr> dx{constant(0), constant(1)};
        Codiffusor dxdx = one_form_product(dx, dx, cs1());
        Codiffusor lx = lie_derivative_codiffusor(x, dxdx);
        CHECK(codiffusor_is_zero(lx - constant(2) * dxdx));
    }

    SECTION("commutes with the second differential") {
        std::mt19937 rng(61);
        for (int i = 0; i < 25; ++i) {
            const CoordinateSystem& cs = (i % 3) ? cs1() : cs2();
            ProjectableVectorField x = rand_projectable(rng, cs);
            Expr g = rand_poly(rng, cs);
            Codiffusor lhs = lie_derivative_codiffusor(x, second_differential(g, cs));
            Codiffusor rhs = second_differential(lie_derivative_function(x, g), cs);
            REQUIRE(codiffusor_is_zero(lhs - rhs));
        }
    }

    SECTION("product rule in the function slot") {
        std::mt19937 rng(67);
        for (int i = 0; i < 15; ++i) {
            const CoordinateSystem& cs = (i % 3) ? cs1() : cs2();
            ProjectableVectorField x = rand_projectable(rng, cs);
            Codiffusor lam = rand_codiffusor(rng, cs);
            Expr f = rand_poly(rng, cs);
            Codiffusor lhs = lie_derivative_codiffusor(x, f * lam);
            Codiffusor rhs =
                lie_derivative_function(x, f) * lam + f * lie_derivative_codiffusor(x, lam);
            REQUIRE(codiffusor_is_zero(lhs - rhs));
        }
    }

    SECTION("leibniz rule across the pairing") {
        std::mt19937 rng(71);
        for (int i = 0; i < 20; ++i) {
            const CoordinateSystem& cs = (i % 3) ? cs1() : cs2();
            ProjectableVectorField x = rand_projectable(rng, cs);
            Codiffusor lam = rand_codiffusor(rng, cs);
            Diffusor ld = rand_diffusor(rng, cs);
            Expr lhs = lie_derivative_function(x, pair(lam, ld));
            Expr rhs = pair(lie_derivative_codiffusor(x, lam), ld) +
                       pair(lam, lie_derivative_diffusor(x, ld));
            check_exact_zero(lhs - rhs);
        }
    }
}

TEST_CASE("pullbacks and pushforwards") {
    CoordinateSystem tgt({"u"}, "s");
    auto Pt = [&](const std::string& s) { return parse_expr(s, tgt); };

    SECTION("linear rescaling") {
        Diffeomorphism phi(cs1(), tgt, P("t"), {P("2*x")}, Pt("s"), {Pt("u/2")});
        Codiffusor d2u = second_differential(Pt("u"), tgt);
        Codiffusor pb = pullback_codiffusor(phi, d2u);
        CHECK(is_zero(pb.first(1) - P("2")));
        CHECK(is_zero(pb.first(0)));
        CHECK(is_zero(pb.second(1, 1)));

        Diffusor fwd = pushforward_diffusor(phi, bm1());
        CHECK(is_zero(fwd.a(1, 1) - constant(4)));
        CHECK(is_zero(fwd.b(0) - constant(1)));
        CHECK(is_zero(fwd.b(1)));
        CHECK(is_zero(fwd.a(0, 1)));
        CHECK(fwd.is_standard());
    }

    SECTION("quadratic map pulls back with a correction term") {
        Diffeomorphism phi(cs1(), tgt, P("t"), {P("x^2")});
        Codiffusor pb = pullback_codiffusor(phi, second_differential(Pt("u"), tgt));
        CHECK(is_zero(pb.first(1) - P("2*x")));
        CHECK(is_zero(pb.second(1, 1) - P("2")));
        CHECK_THROWS_AS(pushforward_diffusor(phi, bm1()), MissingInverse);
        CHECK_THROWS_AS(pushforward_codiffusor(phi, Codiffusor::zero(cs1())), MissingInverse);
    }

    SECTION("identity map changes nothing") {
        Diffeomorphism id = Diffeomorphism::identity(cs1());
        std::mt19937 rng(73);
        Codiffusor lam = rand_codiffusor(rng, cs1());
        Diffusor ld = rand_diffusor(rng, cs1());
        CHECK(codiffusor_is_zero(pullback_codiffusor(id, lam) - lam));
        CHECK(diffusor_is_zero(pushforward_diffusor(id, ld) - ld));
    }

    SECTION("pushforward acts on functions through composition") {
        Diffeomorphism phi(cs1(), tgt, P("t"), {P("2*x")}, Pt("s"), {Pt("u/2")});
        Diffusor fwd = pushforward_diffusor(phi, bm1());
        for (const auto& s : {"u", "u^2", "s*u", "u^3 + s"}) {
            Expr g = Pt(s);
            Expr lhs = apply_diffusor(fwd, g);
            Expr rhs = pushforward_function(phi, apply_diffusor(bm1(), pullback_function(phi, g)));
            CHECK(is_zero(lhs - rhs));
        }
    }

    SECTION("round trips and duality on fuzzed triangular maps") {
        std::mt19937 rng(79);
        for (int i = 0; i < 12; ++i) {
            const CoordinateSystem& cs = (i % 3) ? cs1() : cs2();
            Diffeomorphism phi = rand_diffeo(rng, cs);
            Codiffusor lam = rand_codiffusor(rng, cs);
            Diffusor ld = rand_diffusor(rng, cs);

            REQUIRE(codiffusor_is_zero(
                pushforward_codiffusor(phi, pullback_codiffusor(phi, lam)) - lam));
            REQUIRE(diffusor_is_zero(pullback_diffusor(phi, pushforward_diffusor(phi, ld)) - ld));

            Expr lhs = pair(lam, pullback_diffusor(phi, ld));
            Expr rhs = pullback_function(phi, pair(pushforward_codiffusor(phi, lam), ld));
            check_exact_zero(lhs - rhs);
        }
    }

    SECTION("pullback distributes over one-form products") {
        std::mt19937 rng(83);
        for (int i = 0; i < 12; ++i) {
            const CoordinateSystem& cs = (i % 3) ? cs1() : cs2();
            Diffeomorphism phi = rand_diffeo(rng, cs);
            std::vector<Expr> om = rand_components(rng, cs);
            std::vector<Expr> ga = rand_components(rng, cs);
            Codiffusor lhs = pullback_codiffusor(phi, one_form_product(om, ga, cs));
            Codiffusor rhs = one_form_product(pullback_one_form(phi, om),
                                              pullback_one_form(phi, ga), cs);
            REQUIRE(codiffusor_is_zero(lhs - rhs));
        }
    }
}

TEST_CASE("one-form lie derivatives and field images") {
    SECTION("radial stretching doubles a linear one-form") {
        ProjectableVectorField x(cs1(), {P("x")}, constant(0));
        auto out = lie_derivative_one_form(x, {constant(0), P("x")});
        check_exact_zero(out[0]);
        check_exact_zero(out[1] - P("2*x"));
    }
    SECTION("product rule over one-form products") {
        std::mt19937 rng(0xF0F1);
        for (int rep = 0; rep < 12; ++rep) {
            const CoordinateSystem& cs = rep % 2 ? cs2() : cs1();
            ProjectableVectorField x = rand_projectable(rng, cs);
            std::vector<Expr> om = rand_components(rng, cs), ga = rand_components(rng, cs);
            Codiffusor lhs = lie_derivative_codiffusor(x, one_form_product(om, ga, cs));
            Codiffusor rhs = one_form_product(lie_derivative_one_form(x, om), ga, cs) +
                             one_form_product(om, lie_derivative_one_form(x, ga), cs);
            REQUIRE(codiffusor_is_zero(lhs + constant(-1) * rhs));
        }
    }
    SECTION("pushing a field forward commutes with lie derivatives") {
        std::mt19937 rng(0xF0F2);
        for (int rep = 0; rep < 12; ++rep) {
            const CoordinateSystem& cs = rep % 2 ? cs2() : cs1();
            Diffeomorphism f = rand_diffeo(rng, cs);
            ProjectableVectorField x = rand_projectable(rng, cs);
            ProjectableVectorField fx = pushforward_field(f, x);
            Codiffusor lam = rand_codiffusor(rng, cs);
            Codiffusor dl = lie_derivative_codiffusor(fx, pushforward_codiffusor(f, lam)) +
                            constant(-1) * pushforward_codiffusor(f, lie_derivative_codiffusor(x, lam));
            REQUIRE(codiffusor_is_zero(dl));
            Diffusor l = rand_diffusor(rng, cs);
            Diffusor dd = lie_derivative_diffusor(fx, pushforward_diffusor(f, l)) +
                          constant(-1) * pushforward_diffusor(f, lie_derivative_diffusor(x, l));
            REQUIRE(diffusor_is_zero(dd));
        }
    }
    SECTION("the image field acts on pushed functions like the source field") {
        std::mt19937 rng(0xF0F3);
        for (int rep = 0; rep < 6; ++rep) {
            Diffeomorphism f = rand_diffeo(rng, cs2());
            ProjectableVectorField x = rand_projectable(rng, cs2());
            Expr g = rand_poly(rng, cs2());
            Expr lhs = lie_derivative_function(pushforward_field(f, x), pushforward_function(f, g));
            Expr rhs = pushforward_function(f, lie_derivative_function(x, g));
            check_exact_zero(lhs - rhs);
        }
    }
}

TEST_CASE("annihilator of a standard diffusor") {
    Diffusor l = bm1();

    SECTION("canonical element of the square") {
        Codiffusor el = canonical_annihilator_element(P("x^2"), l);
        CHECK(is_zero(el.first(0) + constant(2)));
        CHECK(is_zero(el.first(1) - P("2*x")));
        CHECK(is_zero(el.second(1, 1) - constant(2)));
        auto r = in_annihilator(el, l);
        CHECK(r.member);
    }

    SECTION("time differential is not annihilated") {
        auto r = in_annihilator(second_differential(P("t"), cs1()), l);
        CHECK_FALSE(r.member);
    }

    SECTION("canonical elements always land in the annihilator") {
        std::mt19937 rng(89);
        for (int i = 0; i < 20; ++i) {
            const CoordinateSystem& cs = (i % 3) ? cs1() : cs2();
            Diffusor ld = rand_standard_diffusor(rng, cs);
            Expr g = rand_poly(rng, cs);
            auto r = in_annihilator(canonical_annihilator_element(g, ld), ld);
            REQUIRE(r.member);
            REQUIRE_FALSE(r.probabilistic);
        }
    }

    SECTION("needs a standard diffusor") {
        Diffusor zero(cs1(), SymExprMatrix(2), {constant(0), constant(0)});
        CHECK_THROWS_AS(canonical_annihilator_element(P("x"), zero), NotStandard);
        CHECK_FALSE(zero.is_standard());
        CHECK(bm1().is_standard());
    }
}

TEST_CASE("good candidate probing") {
    SECTION("positive semidefinite blocks pass") {
        CHECK(good_candidate(bm1()));
        SymExprMatrix a(1);
        a.set(0, 0, P("x^2"));
        CHECK(good_candidate(Diffusor::standard(cs1(), a, {P("0")})));
        SymExprMatrix a2(2);
        a2.set(0, 0, parse_expr("1 + x^2", cs2()));
        a2.set(0, 1, parse_expr("x", cs2()));
        a2.set(1, 1, parse_expr("1", cs2()));
        CHECK(good_candidate(
            Diffusor::standard(cs2(), a2, {parse_expr("0", cs2()), parse_expr("0", cs2())})));
    }

    SECTION("indefinite blocks fail") {
        SymExprMatrix a(1);
        a.set(0, 0, P("-1"));
        CHECK_FALSE(good_candidate(Diffusor::standard(cs1(), a, {P("0")})));
        SymExprMatrix a2(2);
        a2.set(0, 0, parse_expr("1", cs2()));
        a2.set(0, 1, parse_expr("2", cs2()));
        a2.set(1, 1, parse_expr("1", cs2()));
        CHECK_FALSE(good_candidate(
            Diffusor::standard(cs2(), a2, {parse_expr("0", cs2()), parse_expr("0", cs2())})));
    }

    SECTION("unprobeable coefficients are reported") {
        SymExprMatrix a(1);
        a.set(0, 0, P("log(-1 - x^2)"));
        Diffusor l = Diffusor::standard(cs1(), a, {P("0")});
        CHECK_THROWS_AS(good_candidate(l), EvaluationDomainError);
    }
}

TEST_CASE("construction validation") {
    SECTION("projectable fields reject spatial time components") {
        CHECK_THROWS_AS(ProjectableVectorField(cs1(), {P("1")}, P("x")), DimensionMismatch);
        CHECK_THROWS_AS(ProjectableVectorField(cs1(), {P("1"), P("1")}, P("t")),
                        DimensionMismatch);
        CHECK_THROWS_AS(ProjectableVectorField(cs1(), {variable("q")}, P("t")), UnknownVariable);
    }

    SECTION("coefficient shapes must match the chart") {
        CHECK_THROWS_AS(Diffusor(cs1(), SymExprMatrix(3), {P("0"), P("0"), P("0")}),
                        DimensionMismatch);
        CHECK_THROWS_AS(Codiffusor(cs1(), {P("0")}, SymExprMatrix(2)), DimensionMismatch);
        CHECK_THROWS_AS(VectorField(cs1(), {P("0")}), DimensionMismatch);
    }

    SECTION("mismatched charts refuse to pair") {
        Codiffusor lam = Codiffusor::zero(cs2());
        CHECK_THROWS_AS(pair(lam, bm1()), DimensionMismatch);
    }

    SECTION("time maps live on the time axis") {
        CoordinateSystem tgt({"u"}, "s");
        CHECK_THROWS_AS(Diffeomorphism(cs1(), tgt, P("x"), {P("x")}), DimensionMismatch);
    }

    SECTION("inverses are checked by round trip") {
        CoordinateSystem tgt({"u"}, "s");
        auto Pt = [&](const std::string& s) { return parse_expr(s, tgt); };
        CHECK_THROWS_AS(Diffeomorphism(cs1(), tgt, P("t"), {P("2*x")}, Pt("s"), {Pt("u/3")}),
                        DimensionMismatch);
        CHECK_THROWS_AS(Diffeomorphism(cs1(), tgt, P("2*t"), {P("x")}, Pt("s"), {Pt("u")}),
                        DimensionMismatch);
        CHECK_NOTHROW(Diffeomorphism(cs1(), tgt, P("2*t"), {P("x")}, Pt("s/2"), {Pt("u")}));
    }

    SECTION("inverse maps need one component per coordinate") {
        CoordinateSystem tgt({"u"}, "s");
        CHECK_THROWS_AS(Diffeomorphism(cs1(), tgt, P("t"), {P("x")}, parse_expr("s", tgt),
                                       std::vector<Expr>{}),
                        DimensionMismatch);
    }
}
