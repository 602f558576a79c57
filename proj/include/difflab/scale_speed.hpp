#pragma once

#include <memory>
#include <optional>

#include "difflab/model.hpp"
#include "difflab/quad.hpp"

namespace difflab {

namespace detail {
class ScaleSpeedImpl;
struct Frame;
}

struct ScaleOptions {
    double step = 0.005;        // relative grid spacing
    double reach = 1e18;        // infinite sides: grid extends to reach * width
    double closeness = 1e-15;   // finite sides: grid stops this close (relative) to the end
    int max_nodes_per_side = 12000;
    quad::Tolerance tol{1e-12, 1e-300};
};

struct ScaleOptions;
class ScaleFunction;
class SpeedMeasure;
SpeedMeasure build_speed(const CoefficientSpec& spec, const ScaleFunction& scale,
                         const std::vector<SpeedAtom>& atoms = {});

/// s normalized so that s(c) = 0 and s'(c) = 1.
class ScaleFunction {
public:
    double operator()(double x) const;
    /// s(y) - s(x), free of the cancellation in the reference-point shift.
    double increment(double x, double y) const;
    double derivative(double x) const;
    /// log s'(x); finite even where s' overflows.
    double log_derivative(double x) const;
    /// (s(x) - s(c)) / s'(x); finite even where s overflows.
    double gap_ratio(double x) const;
    /// Throws InversionError when y is outside the range of s.
    double inverse(double y) const;
    /// s at the boundary as an improper integral of s'.
    const quad::Verdict& limit(Side side) const;
    /// limit(side) as a number: value, or -inf/+inf when it diverges, NaN when inconclusive.
    double end_value(Side side) const;

    double reference_point() const noexcept;
    const Interval& domain() const noexcept;
    bool is_identity() const noexcept;
    int grid_size() const noexcept;

private:
    friend struct ScaleSpeed;
    friend SpeedMeasure build_speed(const CoefficientSpec&, const ScaleFunction&, const std::vector<SpeedAtom>&);
    friend ScaleFunction build_scale(const CoefficientSpec&, double, const ScaleOptions&);
    explicit ScaleFunction(std::shared_ptr<const detail::Frame> frame) : frame_(std::move(frame)) {}
    std::shared_ptr<const detail::Frame> frame_;
};

class SpeedMeasure {
public:
    double density(double x) const;
    /// m((a, b]) for a <= b in J; includes the right atom when b is a closed endpoint.
    double measure_of(double a, double b) const;
    /// m((a, b]) restricted to the interior of J.
    double interior_mass(double a, double b) const;
    std::optional<AtomMass> atom(Side side) const;
    /// s'(x) times the density; 1/sigma^2 for Ito coefficients.
    double density_times_derivative(double x) const;
    const Interval& domain() const noexcept;

private:
    friend struct ScaleSpeed;
    friend SpeedMeasure build_speed(const CoefficientSpec&, const ScaleFunction&, const std::vector<SpeedAtom>&);
    explicit SpeedMeasure(std::shared_ptr<const detail::Frame> frame) : frame_(std::move(frame)) {}
    std::shared_ptr<const detail::Frame> frame_;
};

struct ScaleSpeed {
    ScaleFunction scale;
    SpeedMeasure speed;

    explicit ScaleSpeed(std::shared_ptr<const detail::Frame> frame);

    /// Same process, reference point moved to c.
    ScaleSpeed rebased(double c) const;
};

ScaleFunction build_scale(const CoefficientSpec& spec, double c, const ScaleOptions& options = {});
/// Density 1/(s' sigma^2) with the given boundary atoms.
SpeedMeasure build_speed(const CoefficientSpec& spec, const ScaleFunction& scale,
                         const std::vector<SpeedAtom>& atoms);
/// Scale and speed for any spec. Without c the default reference point is used.
ScaleSpeed build_scale_speed(const DiffusionSpec& spec, std::optional<double> c = std::nullopt,
                             const ScaleOptions& options = {});

/// Point whose scale value is the midpoint of the scale image of a central window.
double default_reference_point(const DiffusionSpec& spec, const ScaleOptions& options = {});

/// Spec of s(X): identity scale on s(J), speed pushed forward through s.
/// Specs already on natural scale come back unchanged.
ScaleSpeedSpec to_natural_scale(const DiffusionSpec& spec, std::optional<double> c = std::nullopt,
                                const ScaleOptions& options = {});

/// True when the model is on natural scale (zero drift or identity scale).
bool is_natural_scale(const DiffusionSpec& spec) noexcept;

}  // namespace difflab
