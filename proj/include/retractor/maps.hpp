#ifndef RETRACTOR_MAPS_HPP
#define RETRACTOR_MAPS_HPP

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "retractor/geometry.hpp"
#include "retractor/linalg.hpp"

namespace retractor {

/// 1-Lipschitz scalar building blocks for coordinatewise maps.
struct ScalarMap {
  enum class Op { Identity, Clamp, Scale, ShiftClamp };

  Op op = Op::Identity;
  double lo = -1.0;
  double hi = 1.0;
  double factor = 1.0;  // Scale, |factor| <= 1
  double shift = 0.0;   // ShiftClamp

  double operator()(double t) const;
  double lipschitz() const;
};

ScalarMap scalar_identity();
ScalarMap scalar_clamp(double lo, double hi);
ScalarMap scalar_scale(double factor);
ScalarMap scalar_shift_clamp(double shift, double lo, double hi);

enum class CertKind { Proved, Sampled, Unchecked };

/// Nonexpansiveness certificate. Proved carries the exact induced operator
/// norm of the linear part (or the per-coordinate Lipschitz bound for
/// coordinatewise maps); Sampled carries the worst observed expansion ratio.
struct Certificate {
  CertKind kind = CertKind::Unchecked;
  double lipschitz = 0.0;   // Proved
  long long pairs_checked = 0;  // Sampled
  double max_ratio = 0.0;       // Sampled
};

struct AffineForm {
  Matrix linear;
  Vec offset;
};

/// A named self-map of a convex body from a fixed catalog, with a
/// nonexpansiveness certificate attached after certification.
class CertifiedMap {
 public:
  struct Affine {
    Matrix linear;
    Vec offset;
  };
  struct Rotation2D {
    Vec center;        // full-dimensional; rotation acts on coords 0 and 1
    double angle_rad = 0.0;
  };
  struct Isometry {
    std::vector<int> perm;  // out[i] = signs[i] * x[perm[i]]
    Vec signs;              // entries +-1
  };
  struct CoordWise {
    std::vector<ScalarMap> parts;
  };
  struct SquareMap {};  // (x1, x2, ..., xd) -> (x1^2, 0, x2, ..., x_{d-1})
  struct Composite {
    std::vector<CertifiedMap> parts;  // applied first to last
  };
  using Kind =
      std::variant<Affine, Rotation2D, Isometry, CoordWise, SquareMap, Composite>;

  CertifiedMap(std::string name, std::shared_ptr<const ConvexBody> body,
               Kind kind);

  const std::string& name() const { return name_; }
  const ConvexBody& body() const { return *body_; }
  const std::shared_ptr<const ConvexBody>& body_ptr() const { return body_; }
  const Kind& kind() const { return kind_; }
  std::string kind_name() const;

  /// Checked evaluation: rejects inputs outside the body (tol 1e-6) and
  /// flags outputs that leave it (self-map violation, names the map).
  Vec operator()(const Vec& x) const;

  /// Raw evaluation into a caller buffer, no membership checks. Used by the
  /// solver inner loops, which validate their entry points once and whose
  /// iterates stay in the body by convexity.
  void eval_unchecked(const Vec& x, Vec& out) const;

  const Certificate& certificate() const { return cert_; }
  /// Attach a certificate. Do this before sharing the map across threads;
  /// everything else is immutable.
  void set_certificate(Certificate cert) { cert_ = std::move(cert); }

  /// Exact (linear, offset) representation when the map is affine;
  /// composites fold left to right.
  std::optional<AffineForm> affine_form() const;

 private:
  std::string name_;
  std::shared_ptr<const ConvexBody> body_;
  Kind kind_;
  Certificate cert_;
};

CertifiedMap make_identity(std::shared_ptr<const ConvexBody> body,
                           std::string name = "identity");

/// The negative control: on the unit L1 ball in dimension d >= 2, the map
/// (x1, ..., xd) -> (x1^2, 0, x2, ..., x_{d-1}). A self-map but not
/// nonexpansive; its certificate stays Unchecked. The truncation makes 0 a
/// fixed point and (-1, 0, ...) not one, unlike the sequence-space original.
CertifiedMap square_map_example(int dim);

/// Certify nonexpansiveness. Affine-representable kinds get the exact
/// induced operator norm under the body's norm (power iteration for L2,
/// cross-checked by a brute-force Rayleigh sweep in dim <= 3). Coordinatewise
/// maps get the max per-coordinate Lipschitz constant. Everything else is
/// sampled over `samples` pairs (plus deterministic probe pairs along the
/// body axes). Throws CertificationError with a witness when the certified
/// value exceeds 1 + 1e-9.
Certificate certify_nonexpansive(const CertifiedMap& map, long long samples,
                                 std::uint64_t seed);

struct CommutingCert {
  enum class Kind { ProvedAffine, Sampled, Unchecked };
  Kind kind = Kind::Unchecked;
  double max_defect = 0.0;
  long long samples = 0;
};

/// Ordered finite family of maps sharing one body.
class CommutingFamily {
 public:
  CommutingFamily(std::shared_ptr<const ConvexBody> body,
                  std::vector<CertifiedMap> maps);

  const ConvexBody& body() const { return *body_; }
  const std::shared_ptr<const ConvexBody>& body_ptr() const { return body_; }
  const std::vector<CertifiedMap>& maps() const { return maps_; }
  int size() const { return static_cast<int>(maps_.size()); }

  const CommutingCert& certificate() const { return cert_; }
  void set_certificate(CommutingCert cert) { cert_ = cert; }

 private:
  std::shared_ptr<const ConvexBody> body_;
  std::vector<CertifiedMap> maps_;
  CommutingCert cert_;
};

/// All-affine families are compared exactly as composed (matrix, offset)
/// pairs (ProvedAffine iff every pair agrees to 1e-12 entrywise); otherwise
/// the commutator defect is sampled and accepted iff <= 1e-8. Throws
/// NonCommutingError with an (i, j, x) witness on failure.
CommutingCert certify_commuting(const CommutingFamily& family,
                                long long samples, std::uint64_t seed);

/// Sampled commutator defect between two maps on their shared body.
double commuting_defect(const CertifiedMap& a, const CertifiedMap& b,
                        long long samples, std::uint64_t seed, Vec* worst_x = nullptr);

}  // namespace retractor

#endif  // RETRACTOR_MAPS_HPP
