#include <limits>
#include <sstream>

#include "doctest.h"
#include "bsr/milp/solver.hpp"

using namespace bsr::milp;

TEST_SUITE("milp") {

TEST_CASE("add_var registers kind, bounds and name") {
    Model m;
    const VarId y = m.add_var(VarKind::Binary, 0, 1, "y_L_13_18");
    const VarId p = m.add_var(VarKind::Continuous, 0, 24.5, "P_ES_51r");
    CHECK(m.var(y).kind == VarKind::Binary);
    CHECK(m.var(p).hi == doctest::Approx(24.5));
    CHECK(m.var(p).name == "P_ES_51r");
    CHECK(m.num_vars() == 2);
    CHECK(m.num_binaries() == 1);
    CHECK_THROWS_AS(m.add_var(VarKind::Continuous, 5, 3, "bad"), ModelError);
    CHECK_THROWS_AS(m.add_var(VarKind::Binary, 0, 2, "bad"), ModelError);
}

TEST_CASE("add_constraint stores tag and rejects foreign variables") {
    Model m;
    const VarId x = m.add_binary("x");
    const VarId y = m.add_binary("y");
    const ConstraintId c = m.add_constraint(x + y, Sense::LessEqual, 1, "eq11");
    CHECK(m.constraint(c).tag == "eq11");
    CHECK(m.constraints_with_tag("eq11").size() == 1);

    const ConstraintId d = m.add_constraint(x - x, Sense::Equal, 0, "t");
    CHECK(m.constraint(d).expr.terms().empty());

    Model other;
    const VarId foreign = other.add_binary("a");
    (void)other.add_binary("b");
    (void)other.add_binary("c");
    CHECK_THROWS_AS(m.add_constraint(LinExpr(VarId(7)), Sense::LessEqual, 1, "eq11"), ModelError);
    CHECK_NOTHROW(m.add_constraint(LinExpr(foreign), Sense::LessEqual, 1, "eq11"));
    CHECK_THROWS_AS(m.add_constraint(LinExpr(x), Sense::LessEqual, 1, ""), ModelError);
}

TEST_CASE("constants fold into the right-hand side") {
    Model m;
    const VarId x = m.add_continuous(0, 10, "x");
    const ConstraintId c = m.add_le(x + 2.0, LinExpr(5.0), "t");
    CHECK(m.constraint(c).rhs == doctest::Approx(3.0));
    CHECK(m.constraint(c).expr.constant() == 0.0);
}

TEST_CASE("linearize_binary_product matches a*b on all corners") {
    for (int a = 0; a <= 1; ++a) {
        for (int b = 0; b <= 1; ++b) {
            for (Direction dir : {Direction::Minimize, Direction::Maximize}) {
                Model m;
                const VarId va = m.add_binary("a");
                const VarId vb = m.add_binary("b");
                const VarId w = m.linearize_binary_product(va, vb, "prod");
                m.fix(va, a);
                m.fix(vb, b);
                const SolveResult r = solve(m, LinExpr(w), dir);
                REQUIRE(r.status == SolveStatus::Optimal);
                CHECK(r.value(w) == doctest::Approx(a * b));
            }
        }
    }
    Model m;
    const VarId c = m.add_continuous(0, 1, "c");
    const VarId b = m.add_binary("b");
    CHECK_THROWS_AS(m.linearize_binary_product(c, b, "prod"), ModelError);
}

TEST_CASE("trivial solves") {
    Model m;
    const VarId x = m.add_continuous(0, 100, "x");
    m.add_constraint(LinExpr(x), Sense::LessEqual, 3, "cap");
    const SolveResult r = solve(m, LinExpr(x), Direction::Maximize);
    CHECK(r.status == SolveStatus::Optimal);
    CHECK(r.objective == doctest::Approx(3));
    CHECK(r.has_values());

    m.add_constraint(LinExpr(x), Sense::GreaterEqual, 4, "floor");
    const SolveResult inf = solve(m, LinExpr(x), Direction::Maximize);
    CHECK(inf.status == SolveStatus::Infeasible);
    CHECK_FALSE(inf.has_values());
    CHECK(inf.values.empty());

    Model u;
    const VarId z = u.add_continuous(0, std::numeric_limits<double>::infinity(), "z");
    u.add_constraint(LinExpr(z), Sense::GreaterEqual, 1, "floor");
    CHECK(solve(u, LinExpr(z), Direction::Maximize).status == SolveStatus::Unbounded);
}

TEST_CASE("knapsack optimum equals brute-force enumeration") {
    const std::vector<double> value{6, 10, 12, 7, 3, 8};
    const std::vector<double> weight{1, 2, 3, 2, 1, 3};
    const double cap = 6;
    Model m;
    LinExpr obj, w;
    std::vector<VarId> x;
    for (std::size_t i = 0; i < value.size(); ++i) {
        x.push_back(m.add_binary("x" + std::to_string(i)));
        obj += value[i] * x.back();
        w += weight[i] * x.back();
    }
    m.add_constraint(w, Sense::LessEqual, cap, "cap");
    const SolveResult r = solve(m, obj, Direction::Maximize);
    REQUIRE(r.status == SolveStatus::Optimal);

    double best = 0;
    for (unsigned mask = 0; mask < (1u << value.size()); ++mask) {
        double v = 0, wt = 0;
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (mask & (1u << i)) {
                v += value[i];
                wt += weight[i];
            }
        }
        if (wt <= cap) best = std::max(best, v);
    }
    CHECK(r.objective == doctest::Approx(best).epsilon(1e-9));
    for (VarId v : x) CHECK((r.value(v) == 0.0 || r.value(v) == 1.0));
}

TEST_CASE("re-solving an unchanged model is reproducible") {
    Model m;
    LinExpr obj, w;
    for (int i = 0; i < 12; ++i) {
        const VarId v = m.add_binary("x" + std::to_string(i));
        obj += (3.0 + (i * 7) % 5) * v;
        w += (1.0 + (i * 3) % 4) * v;
    }
    m.add_constraint(w, Sense::LessEqual, 9.5, "cap");
    const SolveResult a = solve(m, obj, Direction::Maximize);
    const SolveResult b = solve(m, obj, Direction::Maximize);
    CHECK(std::abs(a.objective - b.objective) <= 1e-6);
    CHECK(a.values == b.values);
}

TEST_CASE("tag check scores violations per tag") {
    Model m;
    const VarId x = m.add_continuous(0, 10, "x");
    m.add_constraint(LinExpr(x), Sense::LessEqual, 3, "a");
    m.add_constraint(LinExpr(x), Sense::GreaterEqual, 1, "b");
    const std::vector<double> vals{4.0};
    const auto report = check_constraints_by_tag(m, vals, 1e-6);
    REQUIRE(report.size() == 2);
    CHECK(report[0].tag == "a");
    CHECK(report[0].failures == 1);
    CHECK(report[0].worst_violation == doctest::Approx(1.0));
    CHECK(report[1].failures == 0);
}

TEST_CASE("LP dump lists one constraint per line with its tag") {
    Model m("toy");
    const VarId x = m.add_binary("y[1,2]");
    const VarId y = m.add_continuous(0, 5, "p");
    m.add_constraint(x + y, Sense::LessEqual, 1, "eq11", "eq11[h1,1]");
    std::ostringstream os;
    m.write_lp(os, LinExpr(y), Direction::Maximize);
    const std::string text = os.str();
    CHECK(text.find("Maximize") != std::string::npos);
    CHECK(text.find("\\ eq11 eq11[h1,1]") != std::string::npos);
    CHECK(text.find("Binaries") != std::string::npos);
    CHECK(text.find('[', text.find("Subject To")) == text.find("[h1,1]"));
}

TEST_CASE("big-M configuration validation") {
    BigMConfig cfg = BigMConfig::for_peak_load(500);
    CHECK(cfg.power == doctest::Approx(1000));
    CHECK_NOTHROW(cfg.validate());
    cfg.epsilon = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ModelError);
    cfg.epsilon = 1e-4;
    cfg.freq = -1;
    CHECK_THROWS_AS(cfg.validate(), ModelError);
}

TEST_CASE("unknown backend is reported") {
    CHECK_THROWS_AS(make_backend("cplex"), BackendUnavailable);
    CHECK(make_backend("highs")->name() == "highs");
}

}
