#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlbm/circuit.hpp"
#include "qlbm/classical_lbm.hpp"
#include "qlbm/lattice.hpp"
#include "qlbm/simulator.hpp"

namespace qlbm {

enum class CollisionMode { Linear, NonlinearExtended };

std::string to_string(CollisionMode mode);

/// Substate slots of the 4-qubit register s.
namespace slots {
/// Slot of each D2Q9 distribution right after collision (vertical-shift grouping).
inline constexpr std::array<std::size_t, 9> kCollision = {12, 9, 2, 0, 4, 10, 3, 1, 5};
/// Grouping used by the horizontal shift.
inline constexpr std::array<std::size_t, 9> kHorizontal = {12, 0, 2, 9, 5, 1, 3, 10, 4};
/// Integration input order (f1,f5,f2,f6,f3,f7,f4,f8,-,-,-,-,f0,-,-,-).
inline constexpr std::array<std::size_t, 9> kPropagated = {12, 0, 2, 4, 6, 1, 3, 5, 7};
/// Copies of the level-1 inputs kept for the next level-2 state.
inline constexpr std::size_t kCopy = 13;
inline constexpr std::size_t kCount = 16;
}  // namespace slots

struct CollisionEmbedding {
  Eigen::MatrixXd C;
  Eigen::MatrixXd U;
  Eigen::MatrixXd Vt;
  /// Singular values of C, descending.
  std::vector<double> sigma;
  double scale = 1.0;
  std::vector<cplx> sigma1;
  std::vector<cplx> sigma2;
  CollisionMode mode = CollisionMode::Linear;
  std::size_t num_inputs = 3;
  bool copy_block = false;
};

/// Block matrix C: equilibrium rows in collision slot order, identity copy rows when the lattice has two levels.
CollisionEmbedding build_collision_matrix(const PhysicsModel& model, const LatticeConfig& config, CollisionMode mode);

/// SVD and unit-modulus halves of an arbitrary 16x16 real matrix (must be non-zero).
CollisionEmbedding embed_matrix(const Eigen::MatrixXd& C);

/// V^T on s, H(a_c), Sigma1 if a_c=0, Sigma2 if a_c=1, H(a_c), U on s.
std::vector<Gate> svd_embed(const CollisionEmbedding& emb, const RegisterLayout& layout);

struct LedgerEntry {
  std::string name;
  double value = 1.0;
};

/// A labelled sub-circuit together with the deterministic factor it multiplies the kept fields by.
struct Block {
  std::string label;
  Circuit circuit;
  std::vector<LedgerEntry> factors;
  double scale() const;
};

Block build_collision(const CollisionEmbedding& emb, const RegisterLayout& layout);

struct PropagationOptions {
  /// Added to every phase-ladder angle; only for sensitivity tests.
  double ladder_perturbation = 0.0;
};

/// Measurement-free streaming network: QFTs, vertical ladder, regroup, horizontal ladder, IQFTs, regroup.
std::vector<Gate> build_propagation(const LatticeConfig& config, const RegisterLayout& layout,
                                    const PropagationOptions& options = {});

/// Moments of the streamed distributions: rho, V1x, V1y land on slots 0, 1, 2 with factor 1/4.
Block build_integration(const RegisterLayout& layout, bool keep_copies);

/// Boundary conditions, and for two-level layouts the time-level combination.
Block build_boundary(const BoundarySpec& bc, double tau, const RegisterLayout& layout);

Block build_object(const ObjectMask& mask, const RegisterLayout& layout);

RegisterLayout make_layout(std::size_t nx, std::size_t ny, bool two_levels, const BoundarySpec& bc);

struct StepOptions {
  CollisionMode mode = CollisionMode::Linear;
  PropagationOptions propagation{};
};

struct StepCircuitPlan {
  RegisterLayout layout;
  std::size_t nx = 0;
  std::size_t ny = 0;
  CollisionEmbedding collision;
  std::vector<Block> blocks;
  Circuit full;
  double scale() const;
};

StepCircuitPlan build_step(const PhysicsModel& model, const LatticeConfig& config, const BoundarySpec& bc,
                           const ObjectMask& mask, std::size_t nx, std::size_t ny, const StepOptions& options = {});

struct EncodingMap {
  RegisterLayout layout;
  std::size_t nx = 0;
  std::size_t ny = 0;
  CollisionMode mode = CollisionMode::Linear;
  PhysicsModel model;
  std::vector<LedgerEntry> ledger;

  bool two_levels() const { return layout.two_levels; }
  std::size_t num_inputs() const { return mode == CollisionMode::Linear ? 3 : 6; }
  /// Product of every ledger factor: kept amplitude = scale() * field value.
  double scale() const;
  std::uint64_t index(std::size_t x, std::size_t y, std::size_t slot, std::size_t level) const;
};

EncodingMap make_encoding_map(const StepCircuitPlan& plan, const PhysicsModel& model, CollisionMode mode);

struct Encoded {
  Statevector state;
  EncodingMap map;
};

/// Direct amplitude loading of the per-site inputs; the ledger restarts at 1/||v||.
Encoded encode_fields(const FieldState& fields, EncodingMap map);

struct Decoded {
  FieldState fields;
  double residual_probability = 0.0;
  double max_imaginary = 0.0;
};

/// Reads slots 0..2 of every level with all ancillas 0 and divides by the ledger.
Decoded decode_fields(const Statevector& psi, const EncodingMap& map);

struct StepRun {
  Statevector state;
  EncodingMap map;
  double p_keep = 1.0;
  std::vector<BranchRecord> branches;
  /// Probability discarded by each block's measurements (sums to 1 - p_keep).
  std::map<std::string, double> discarded;
};

/// Runs one step circuit in PostSelectZero mode and extends the ledger.
StepRun run_step(const StepCircuitPlan& plan, Statevector psi, EncodingMap map);

/// Encode, run one step, decode. Inputs must carry the plan's number of levels.
FieldState quantum_step(const FieldState& fields, const StepCircuitPlan& plan, const PhysicsModel& model,
                        CollisionMode mode, double* p_keep = nullptr);

}  // namespace qlbm
