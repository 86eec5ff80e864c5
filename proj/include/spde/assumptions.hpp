#pragma once

#include "spde/operators.hpp"
#include "spde/spectral_field.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spde {

/// One inequality of the registry, in the normal form
///   lhs <= c * majorant - gamma * coercive + epsilon * slack.
struct WitnessTerms {
    double lhs = 0.0;
    double majorant = 0.0;
    double coercive = 0.0;
    double slack = 0.0;
};

struct InequalityInfo {
    std::string id;
    int set = 0;
    /// Number of sample fields the inequality quantifies over.
    int arity = 1;
    bool has_gamma = false;
    bool has_epsilon = false;
    /// Fixed-constant check (no fitting): the tail bound.
    bool structural = false;
    std::string statement;
};

/// Ids: A1.1a-c, A1.2a-b, A1.3a-b, A1.4a-b, A2.1, A2.2a-b, A3.1, A3.2a-b, A3.mu.
const std::vector<InequalityInfo>& inequality_registry();
const InequalityInfo& inequality_info(const std::string& id);
/// Accepts a registry id or a group prefix ("A1.2" covers A1.2a and A1.2b).
std::vector<std::string> resolve_assumption_ids(const std::string& id_or_group);

/// Evaluates the terms of one inequality at the given fields (count = arity).
/// `level` is the Galerkin level for Set 3 projections and the tail bound.
WitnessTerms witness_terms(const OperatorPair& pair, const std::string& id,
                           std::span<const SpectralField> fields, double p, int level);

/// RHS - LHS of the inequality at (c, gamma, p, epsilon); >= 0 means satisfied.
double assumption_witness(const OperatorPair& pair, const std::string& id,
                          std::span<const SpectralField> fields, double c, double gamma,
                          double p = 2.0, double epsilon = 0.1, int level = 8);

struct AuditSettings {
    std::size_t samples = 500;
    std::uint64_t seed = 1;
    /// Sample fields live on |k|_inf <= band (also the Set 3 Galerkin level).
    int band = 8;
    /// Each random direction is sampled at `ladder` U-norms spaced
    /// geometrically over [amplitude_min, amplitude_max].
    int ladder = 12;
    double amplitude_min = 1e-2;
    double amplitude_max = 1e4;
    double p = 2.0;
    /// Per-inequality exponent overrides.
    std::map<std::string, double> p_override;
    double epsilon = 0.1;
    /// Largest accepted log-log slope of the needed constant against sample size
    /// over the upper half of each ladder.
    double slope_threshold = 0.25;
};

struct InequalityFit {
    std::string id;
    double c = 0.0;
    double gamma = 0.0;
    double p = 2.0;
    double epsilon = 0.0;
    double worst_margin = 0.0;
    /// Largest regression slope of log(needed c) against log(size) along a ladder.
    double growth_slope = 0.0;
    bool finite = true;
    /// gamma-inequality whose fitted gamma is 0 (the assumption needs gamma > 0).
    bool gamma_edge = false;
    std::size_t samples = 0;
};

/// Sample tuples for an audit: random directions, each scaled along an amplitude
/// ladder. The first direction is the single mode (1,0), the configuration that
/// pins the coercivity constant.
std::vector<std::vector<SpectralField>> audit_samples(const AuditSettings& settings, int arity);

/// Fits (c, gamma) for one inequality: maximize gamma - c subject to every
/// margin being nonnegative, c, gamma >= 0.
InequalityFit fit_inequality(const OperatorPair& pair, const std::string& id,
                             const AuditSettings& settings);

/// All inequalities of Assumption Set 1, 2 or 3.
std::vector<InequalityFit> audit_assumption_set(const OperatorPair& pair, int set,
                                                const AuditSettings& settings);

/// Worst relative defect of an exact identity over random fields.
struct IdentityCheck {
    std::string name;
    double defect = 0.0;
    std::size_t samples = 0;
};

/// advection-skew: <B(u,u),u> = 0; transport-skew: <(xi_i.grad)phi,phi> = 0;
/// leray-idempotence: P P v = P v; projection-self-adjoint: <P_n f,g> = <f,P_n g>.
/// Defects are relative to the size of the terms: ||u||_U^2 ||u||_H for advection,
/// ||xi_i||_U ||phi||_U ||phi||_H for transport, the norms of the operands otherwise.
std::vector<IdentityCheck> structural_identities(const OperatorPair& pair,
                                                 const AuditSettings& settings,
                                                 std::size_t samples = 50);

}  // namespace spde
