#include "bsr/milp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <limits>
#include <ostream>

#include <fmt/format.h>

namespace bsr::milp {

LinExpr& LinExpr::add(VarId var, double coef) {
    terms_.push_back({var, coef});
    return *this;
}

LinExpr LinExpr::normalized() const {
    LinExpr out;
    out.constant_ = constant_;
    std::vector<Term> sorted = terms_;
    std::sort(sorted.begin(), sorted.end(),
              [](const Term& a, const Term& b) { return a.var.index() < b.var.index(); });
    for (const Term& t : sorted) {
        if (!out.terms_.empty() && out.terms_.back().var == t.var) {
            out.terms_.back().coef += t.coef;
        } else {
            out.terms_.push_back(t);
        }
    }
    std::erase_if(out.terms_, [](const Term& t) { return t.coef == 0.0; });
    return out;
}

double LinExpr::evaluate(std::span<const double> values) const {
    double sum = constant_;
    for (const Term& t : terms_) sum += t.coef * values[t.var.index()];
    return sum;
}

LinExpr& LinExpr::operator+=(const LinExpr& rhs) {
    terms_.insert(terms_.end(), rhs.terms_.begin(), rhs.terms_.end());
    constant_ += rhs.constant_;
    return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& rhs) {
    for (const Term& t : rhs.terms_) terms_.push_back({t.var, -t.coef});
    constant_ -= rhs.constant_;
    return *this;
}

LinExpr& LinExpr::operator*=(double s) {
    for (Term& t : terms_) t.coef *= s;
    constant_ *= s;
    return *this;
}

LinExpr operator+(LinExpr lhs, const LinExpr& rhs) { return lhs += rhs; }
LinExpr operator-(LinExpr lhs, const LinExpr& rhs) { return lhs -= rhs; }
LinExpr operator-(LinExpr e) { return e *= -1.0; }
LinExpr operator*(double s, LinExpr e) { return e *= s; }
LinExpr operator*(LinExpr e, double s) { return e *= s; }

std::string_view to_string(Sense s) {
    switch (s) {
    case Sense::LessEqual: return "<=";
    case Sense::Equal: return "=";
    case Sense::GreaterEqual: return ">=";
    }
    return "?";
}

BigMConfig BigMConfig::for_peak_load(double total_peak_kw) {
    BigMConfig cfg;
    cfg.power = std::max(2.0 * total_peak_kw, 1.0);
    return cfg;
}

void BigMConfig::validate() const {
    if (!(power > 0 && freq > 0 && volt > 0 && epsilon > 0)) {
        throw ModelError("big-M constants must all be positive");
    }
    if (!(epsilon < 1e-2 * std::min({power, freq, volt}))) {
        throw ModelError("epsilon must be much smaller than every big-M constant");
    }
}

double violation(const Constraint& c, std::span<const double> values) {
    const double lhs = c.expr.evaluate(values);
    switch (c.sense) {
    case Sense::LessEqual: return std::max(0.0, lhs - c.rhs);
    case Sense::GreaterEqual: return std::max(0.0, c.rhs - lhs);
    case Sense::Equal: return std::abs(lhs - c.rhs);
    }
    return 0.0;
}

std::vector<TagCheck> check_constraints_by_tag(const Model& model, std::span<const double> values,
                                               double tol) {
    std::map<std::string, TagCheck> by_tag;
    for (const Constraint& c : model.constraints()) {
        TagCheck& tc = by_tag[c.tag];
        tc.tag = c.tag;
        ++tc.rows;
        // Scale the tolerance by the row's magnitude so big-M rows are judged fairly.
        double scale = std::abs(c.rhs);
        for (const Term& t : c.expr.terms()) scale = std::max(scale, std::abs(t.coef * values[t.var.index()]));
        const double v = violation(c, values);
        if (v > tol * std::max(1.0, scale)) ++tc.failures;
        if (v > tc.worst_violation) {
            tc.worst_violation = v;
            tc.worst_row = c.name.empty() ? c.tag : c.name;
        }
    }
    std::vector<TagCheck> out;
    out.reserve(by_tag.size());
    for (auto& [_, tc] : by_tag) out.push_back(std::move(tc));
    return out;
}

VarId Model::add_var(VarKind kind, double lo, double hi, std::string name) {
    if (std::isnan(lo) || std::isnan(hi)) throw ModelError("NaN bound on variable " + name);
    if (lo > hi) throw ModelError(fmt::format("inverted bounds [{}, {}] on variable {}", lo, hi, name));
    if (kind == VarKind::Binary && (lo < 0.0 || hi > 1.0)) {
        throw ModelError("binary variable " + name + " must have bounds within [0, 1]");
    }
    vars_.push_back({kind, lo, hi, std::move(name)});
    return VarId(vars_.size() - 1);
}

void Model::check_expr(const LinExpr& expr) const {
    for (const Term& t : expr.terms()) {
        if (!t.var.valid() || t.var.index() >= vars_.size()) {
            throw ModelError(fmt::format("{}: expression references unknown variable", name_));
        }
        if (!std::isfinite(t.coef)) throw ModelError(name_ + ": non-finite coefficient");
    }
    if (!std::isfinite(expr.constant())) throw ModelError(name_ + ": non-finite constant");
}

ConstraintId Model::add_constraint(const LinExpr& expr, Sense sense, double rhs, std::string tag,
                                   std::string name) {
    check_expr(expr);
    if (!std::isfinite(rhs)) throw ModelError("non-finite right-hand side in " + tag);
    if (tag.empty()) throw ModelError("constraint tag must not be empty");
    LinExpr norm = expr.normalized();
    const double folded = rhs - norm.constant();
    norm.add_constant(-norm.constant());
    constraints_.push_back({std::move(norm), sense, folded, std::move(tag), std::move(name)});
    return ConstraintId{constraints_.size() - 1};
}

ConstraintId Model::add_le(const LinExpr& lhs, const LinExpr& rhs, std::string tag, std::string name) {
    return add_constraint(lhs - rhs, Sense::LessEqual, 0.0, std::move(tag), std::move(name));
}

ConstraintId Model::add_eq(const LinExpr& lhs, const LinExpr& rhs, std::string tag, std::string name) {
    return add_constraint(lhs - rhs, Sense::Equal, 0.0, std::move(tag), std::move(name));
}

ConstraintId Model::add_ge(const LinExpr& lhs, const LinExpr& rhs, std::string tag, std::string name) {
    return add_constraint(lhs - rhs, Sense::GreaterEqual, 0.0, std::move(tag), std::move(name));
}

VarId Model::linearize_binary_product(VarId a, VarId b, std::string tag, std::string name) {
    if (var(a).kind != VarKind::Binary || var(b).kind != VarKind::Binary) {
        throw ModelError("linearize_binary_product requires two binary variables");
    }
    if (name.empty()) name = fmt::format("{}*{}", var(a).name, var(b).name);
    const VarId w = add_binary(name);
    add_le(LinExpr(w), LinExpr(a), tag, name + ".le_a");
    add_le(LinExpr(w), LinExpr(b), tag, name + ".le_b");
    add_ge(LinExpr(w), a + b - 1.0, tag, name + ".ge_sum");
    return w;
}

void Model::set_bounds(VarId v, double lo, double hi) {
    VarInfo& info = vars_.at(v.index());
    if (lo > hi) throw ModelError("inverted bounds for " + info.name);
    info.lo = lo;
    info.hi = hi;
}

const VarInfo& Model::var(VarId v) const {
    if (!v.valid() || v.index() >= vars_.size()) throw ModelError("unknown variable handle");
    return vars_[v.index()];
}

std::size_t Model::num_binaries() const {
    return static_cast<std::size_t>(
        std::count_if(vars_.begin(), vars_.end(), [](const VarInfo& v) { return v.kind == VarKind::Binary; }));
}

std::vector<ConstraintId> Model::constraints_with_tag(std::string_view tag) const {
    std::vector<ConstraintId> out;
    for (std::size_t i = 0; i < constraints_.size(); ++i) {
        if (constraints_[i].tag == tag) out.push_back({i});
    }
    return out;
}

std::map<std::string, std::size_t> Model::tag_counts() const {
    std::map<std::string, std::size_t> counts;
    for (const Constraint& c : constraints_) ++counts[c.tag];
    return counts;
}

namespace {

// LP format wants identifiers without brackets, commas or operators.
std::string lp_name(const std::string& raw, std::size_t index) {
    std::string out;
    out.reserve(raw.size() + 2);
    for (char ch : raw) {
        const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.';
        out.push_back(ok ? ch : '_');
    }
    if (out.empty() || std::isdigit(static_cast<unsigned char>(out.front())) || out.front() == '.') {
        out = "x" + std::to_string(index) + "_" + out;
    }
    return out;
}

void write_terms(std::ostream& os, const LinExpr& e, const std::vector<std::string>& names) {
    bool first = true;
    for (const Term& t : e.terms()) {
        os << (t.coef < 0 ? " - " : (first ? " " : " + ")) << std::abs(t.coef) << ' ' << names[t.var.index()];
        first = false;
    }
    if (first) os << " 0 " << (names.empty() ? "x" : names.front());
}

}  // namespace

void Model::write_lp(std::ostream& os, const LinExpr& objective, Direction dir) const {
    std::vector<std::string> names;
    names.reserve(vars_.size());
    for (std::size_t i = 0; i < vars_.size(); ++i) names.push_back(lp_name(vars_[i].name, i) + "_" + std::to_string(i));

    os << "\\ model " << name_ << '\n';
    os << (dir == Direction::Maximize ? "Maximize\n" : "Minimize\n") << " obj:";
    write_terms(os, objective.normalized(), names);
    os << '\n' << "Subject To\n";
    for (std::size_t i = 0; i < constraints_.size(); ++i) {
        const Constraint& c = constraints_[i];
        os << " c" << i << ':';
        write_terms(os, c.expr, names);
        os << ' ' << to_string(c.sense) << ' ' << c.rhs << "  \\ " << c.tag;
        if (!c.name.empty()) os << ' ' << c.name;
        os << '\n';
    }
    os << "Bounds\n";
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        const VarInfo& v = vars_[i];
        os << ' ';
        if (v.lo == -inf) os << "-inf"; else os << v.lo;
        os << " <= " << names[i] << " <= ";
        if (v.hi == inf) os << "+inf"; else os << v.hi;
        os << '\n';
    }
    os << "Binaries\n";
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i].kind == VarKind::Binary) os << ' ' << names[i] << '\n';
    }
    os << "End\n";
}

}  // namespace bsr::milp
