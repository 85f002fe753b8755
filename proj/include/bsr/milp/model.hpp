#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bsr::milp {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class VarKind { Continuous, Binary };

// Opaque handle into a Model's variable table.
class VarId {
public:
    constexpr VarId() = default;
    constexpr explicit VarId(std::size_t index) : index_(index) {}

    constexpr std::size_t index() const { return index_; }
    constexpr bool valid() const { return index_ != kInvalid; }

    friend constexpr bool operator==(VarId, VarId) = default;
    friend constexpr auto operator<=>(VarId, VarId) = default;

private:
    static constexpr std::size_t kInvalid = static_cast<std::size_t>(-1);
    std::size_t index_ = kInvalid;
};

struct Term {
    VarId var;
    double coef = 0.0;
};

class LinExpr {
public:
    LinExpr() = default;
    LinExpr(double constant) : constant_(constant) {}  // NOLINT(google-explicit-constructor)
    LinExpr(VarId var, double coef = 1.0) { add(var, coef); }  // NOLINT(google-explicit-constructor)

    LinExpr& add(VarId var, double coef);
    LinExpr& add_constant(double c) {
        constant_ += c;
        return *this;
    }

    const std::vector<Term>& terms() const { return terms_; }
    double constant() const { return constant_; }
    bool empty() const { return terms_.empty(); }

    // Duplicates merged, zero coefficients dropped, sorted by variable index.
    LinExpr normalized() const;

    double evaluate(std::span<const double> values) const;

    LinExpr& operator+=(const LinExpr& rhs);
    LinExpr& operator-=(const LinExpr& rhs);
    LinExpr& operator*=(double s);

private:
    std::vector<Term> terms_;
    double constant_ = 0.0;
};

LinExpr operator+(LinExpr lhs, const LinExpr& rhs);
LinExpr operator-(LinExpr lhs, const LinExpr& rhs);
LinExpr operator-(LinExpr e);
LinExpr operator*(double s, LinExpr e);
LinExpr operator*(LinExpr e, double s);
inline LinExpr operator*(double s, VarId v) { return LinExpr(v, s); }
inline LinExpr operator+(VarId a, VarId b) { return LinExpr(a) + LinExpr(b); }
inline LinExpr operator-(VarId a, VarId b) { return LinExpr(a) - LinExpr(b); }

enum class Sense { LessEqual, Equal, GreaterEqual };
enum class Direction { Minimize, Maximize };

std::string_view to_string(Sense s);

struct ConstraintId {
    std::size_t index = 0;
};

// Constraint rows are stored normalized: the expression carries no constant
// (it is folded into rhs).
struct Constraint {
    LinExpr expr;
    Sense sense = Sense::LessEqual;
    double rhs = 0.0;
    std::string tag;   // constraint family, e.g. "eq38"
    std::string name;  // instance label, e.g. "eq38[B3,4]"
};

struct VarInfo {
    VarKind kind = VarKind::Continuous;
    double lo = 0.0;
    double hi = 0.0;
    std::string name;
};

struct BigMConfig {
    double power = 1.0e4;  // kW / kvar
    double freq = 10.0;    // Hz
    double volt = 2.0;     // pu^2
    double epsilon = 1.0e-4;

    // M_power = 2 x total feeder peak load.
    static BigMConfig for_peak_load(double total_peak_kw);
    void validate() const;
};

// Amount by which `c` is violated at `values` (0 when satisfied).
double violation(const Constraint& c, std::span<const double> values);

struct TagCheck {
    std::string tag;
    std::size_t rows = 0;
    std::size_t failures = 0;
    double worst_violation = 0.0;
    std::string worst_row;
};

// Re-evaluates every stored constraint against a value vector, grouped by tag.
std::vector<TagCheck> check_constraints_by_tag(const class Model& model, std::span<const double> values,
                                               double tol);

class Model {
public:
    explicit Model(std::string name = "model") : name_(std::move(name)) {}

    const std::string& name() const { return name_; }

    VarId add_var(VarKind kind, double lo, double hi, std::string name);
    VarId add_binary(std::string name) { return add_var(VarKind::Binary, 0.0, 1.0, std::move(name)); }
    VarId add_continuous(double lo, double hi, std::string name) {
        return add_var(VarKind::Continuous, lo, hi, std::move(name));
    }

    ConstraintId add_constraint(const LinExpr& expr, Sense sense, double rhs, std::string tag,
                                std::string name = {});
    ConstraintId add_le(const LinExpr& lhs, const LinExpr& rhs, std::string tag, std::string name = {});
    ConstraintId add_eq(const LinExpr& lhs, const LinExpr& rhs, std::string tag, std::string name = {});
    ConstraintId add_ge(const LinExpr& lhs, const LinExpr& rhs, std::string tag, std::string name = {});

    // Binary w = a*b via w <= a, w <= b, w >= a + b - 1.
    VarId linearize_binary_product(VarId a, VarId b, std::string tag, std::string name = {});

    void set_bounds(VarId v, double lo, double hi);
    void fix(VarId v, double value) { set_bounds(v, value, value); }

    const VarInfo& var(VarId v) const;
    std::size_t num_vars() const { return vars_.size(); }
    std::size_t num_constraints() const { return constraints_.size(); }
    std::size_t num_binaries() const;
    std::span<const VarInfo> vars() const { return vars_; }
    std::span<const Constraint> constraints() const { return constraints_; }
    const Constraint& constraint(ConstraintId id) const { return constraints_.at(id.index); }

    std::vector<ConstraintId> constraints_with_tag(std::string_view tag) const;
    std::map<std::string, std::size_t> tag_counts() const;

    // LP-format-compatible dump, one constraint per line with its tag as a comment.
    void write_lp(std::ostream& os, const LinExpr& objective, Direction dir) const;

private:
    void check_expr(const LinExpr& expr) const;

    std::string name_;
    std::vector<VarInfo> vars_;
    std::vector<Constraint> constraints_;
};

}  // namespace bsr::milp
