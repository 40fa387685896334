#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

/// Discrete function/measure spaces with exact norm oracles.
///
/// A finite point set K stands in for a compact topological space.  Functions
/// on K carry the sup norm, point-mass assignments carry the total-variation
/// norm, and an operator into functions on a second finite set S is stored as
/// one measure row per point of S.  Everything downstream (the correction
/// pipelines) is verified against the closed-form or enumerative norms
/// implemented here and nothing else.
namespace bpb {

inline constexpr double kDefaultTol = 1e-9;   ///< certificate equality tolerance
inline constexpr double kFloatSlack = 1e-12;  ///< slack for "exact in real arithmetic" checks
inline constexpr std::size_t kOracleDimCap = 20;  ///< sign enumeration capped at 2^20 classes

/// Input fails a documented quantitative precondition (e.g. slack too large).
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Independent re-verification of a certificate failed.
struct VerificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An adaptive search or enumeration exceeded its configured budget.
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A guaranteed postcondition failed at runtime; indicates an internal defect.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

using Vec = std::vector<double>;

/// Finite point set.  Labels are optional; when present there is one per point.
struct PointSet {
  std::size_t size = 0;
  std::vector<std::string> labels;

  void validate() const;
};

/// Real-valued function on a finite point set (sup norm).
struct Fn {
  Vec values;

  std::size_t dim() const { return values.size(); }
};

/// Signed point-mass assignment on a finite point set (total-variation norm).
struct Meas {
  Vec masses;

  std::size_t dim() const { return masses.size(); }
};

/// Operator from functions on K (dim source_dim) to functions on S, stored as
/// one measure row per point of S.  Acting: (T f)(s) = pair(f, rows[s]).
struct Kernel {
  std::size_t source_dim = 0;
  std::vector<Meas> rows;

  std::size_t target_dim() const { return rows.size(); }
  void validate() const;
};

/// Norm tag for finite-dimensional spaces: sup, Euclidean, or an explicit
/// p-norm with p >= 1.  Euclidean is kept distinct from p:2 so serialized
/// operators round-trip their advertised geometry.
struct NormTag {
  enum class Kind { Sup, Euclid, P };

  Kind kind = Kind::Sup;
  double p = 0.0;

  static NormTag sup() { return {Kind::Sup, 0.0}; }
  static NormTag euclid() { return {Kind::Euclid, 0.0}; }
  static NormTag lp(double p);

  /// Tag of the dual norm (sup <-> p:1, euclid <-> euclid, p <-> p/(p-1)).
  NormTag dual() const;

  std::string str() const;
  static NormTag parse(const std::string& text);

  bool operator==(const NormTag& o) const;
};

/// Dense operator between two tagged finite-dimensional normed spaces.
/// matrix[i] is the i-th target coordinate functional (one row per target
/// coordinate, one column per source coordinate).
struct GeneralOperator {
  std::vector<Vec> matrix;
  NormTag source_norm;
  NormTag target_norm;

  std::size_t target_dim() const { return matrix.size(); }
  std::size_t source_dim() const { return matrix.empty() ? 0 : matrix[0].size(); }
  void validate() const;
};

/// Machine-checkable statement that an operator attains its norm at `witness`
/// close to the original data.  Verification recomputes every claim from the
/// operator and witness alone.
struct BpbCertificate {
  Vec witness;
  double attained_norm = 0.0;
  double dist_point = 0.0;
  double dist_operator = 0.0;
  double epsilon = 0.0;
  double tol = kDefaultTol;
};

// --- elementary norms and pairings -----------------------------------------

double sup_norm(const Fn& f);
double tv_norm(const Meas& m);

/// Duality pairing sum_t f(t) m(t).  Throws std::invalid_argument on domain
/// mismatch.
double pair(const Fn& f, const Meas& m);

/// Operator norm of a kernel: max over rows of the total variation.
double kernel_norm(const Kernel& k);

Fn kernel_apply(const Kernel& k, const Fn& f);
Kernel kernel_sub(const Kernel& a, const Kernel& b);
Kernel kernel_scale(const Kernel& k, double c);

/// View a kernel as a sup-to-sup operator (rows become matrix rows).
GeneralOperator kernel_as_operator(const Kernel& k);

// --- vector norms over tagged spaces ----------------------------------------

double vector_norm(const Vec& v, const NormTag& tag);

/// Norm of `functional` acting on the space tagged `space`, i.e. the norm of
/// the vector in the dual tag.
double dual_norm(const Vec& functional, const NormTag& space);

/// Unit vector y (in `space`) with <functional, y> = dual_norm(functional),
/// chosen deterministically.  Throws std::invalid_argument for the zero
/// functional.
Vec norming_vector(const Vec& functional, const NormTag& space);

Vec op_apply(const GeneralOperator& a, const Vec& x);
GeneralOperator op_sub(const GeneralOperator& a, const GeneralOperator& b);
GeneralOperator op_scale(const GeneralOperator& a, double c);

/// Composition a after b (source of a must equal target of b).
GeneralOperator op_compose(const GeneralOperator& a, const GeneralOperator& b);

// --- exact norm oracles ------------------------------------------------------

/// Result of exhaustive sign-vector search: the exact operator norm for a
/// sup-norm source, together with an attaining sign vector.
struct SignSearch {
  double value = 0.0;
  std::vector<int> signs;
};

/// Exact operator norm for operators with sup-norm source, by enumeration of
/// sign vectors.  The extreme points of the sup ball are sign vectors and the
/// target norm is convex, so the enumeration is exhaustive.  Symmetry
/// sigma -> -sigma halves the search.  Throws BudgetError above `dim_cap`
/// source dimensions.
SignSearch oracle_norm(const GeneralOperator& a, std::size_t dim_cap = kOracleDimCap);

/// Exact operator norm via the closed form available for the tag pair:
/// sup-norm sources use oracle_norm, sup-norm targets use max row dual norm.
/// Throws std::invalid_argument for unsupported tag pairs.
double operator_norm(const GeneralOperator& a, std::size_t dim_cap = kOracleDimCap);

// --- measure/function geometry ----------------------------------------------

/// max - min of f over a non-empty index block.
double oscillation(const Fn& f, const std::vector<std::size_t>& block);

/// Partition of the index set by mass sign; zero masses join the positive
/// side, so tv_norm(m) = m(positive) - m(negative) holds exactly.
struct HahnSplit {
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;
};

HahnSplit hahn_split(const Meas& m);

// --- deterministic randomness ------------------------------------------------

/// Seeded generator with platform-independent output (std::mt19937_64 has a
/// standard-fixed sequence; the double conversion uses explicit bit
/// arithmetic rather than distribution objects, which vary by vendor).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  /// Uniform in [a, b).
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal (Box-Muller from uniform bits).
  double gaussian();

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Format a double with 17 significant digits (round-trip safe).
std::string fmt17(double x);

}  // namespace bpb
