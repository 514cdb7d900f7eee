#pragma once

#include <memory>
#include <string>
#include <vector>

namespace waves {

/// Sign class of the vorticity function, used to select which certificates
/// apply and to suppress the Breaking label where wave breaking is ruled out.
enum class OmegaClass { Zero, Nonnegative, General };

std::string omega_class_name(OmegaClass c);

/// Vorticity as a function of the stream-function value p in [0,1], together
/// with its primitive Omega (Omega(0) = 0 exactly). Instances are immutable
/// and cheap to copy; tabulated data lives behind a shared pointer.
///
/// Supported kinds: identically zero, constant b, linear slope*p, and
/// tabulated samples interpolated by a clamped cubic spline whose primitive
/// is integrated in closed form.
class VorticityModel {
  public:
    double omega(double p) const;
    double Omega(double p) const;

    OmegaClass omega_class() const;
    double holder_gamma() const;

    double omega_min() const;       // min of omega over [0,1]
    double Omega1() const;          // Omega(1)
    double two_omega_max() const;   // max of 2*Omega over [0,1]  (= s0^2)
    double two_omega_argmax() const;

    const std::string& describe() const;

    /// Machine-readable description sufficient to rebuild the model, embedded
    /// in field sidecar files. Inverse of from_spec_json.
    std::string spec_json() const;
    static VorticityModel from_spec_json(const std::string& text);

    static VorticityModel zero();
    static VorticityModel constant(double b, double gamma = 0.5);
    static VorticityModel linear(double slope, double gamma = 0.5);
    static VorticityModel tabulated(const std::vector<double>& p,
                                    const std::vector<double>& w,
                                    double gamma = 0.5);

    struct Impl;

  private:
    explicit VorticityModel(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
};

/// Build a model from a one-line description as it appears in config files:
///   zero | constant B | linear A | tabulated PATH
/// The tabulated file holds "p,omega" CSV rows (optional header) with p
/// covering [0,1]; relative paths resolve against base_dir.
VorticityModel build_vorticity_model(const std::string& spec, double gamma = 0.5,
                                     const std::string& base_dir = "");

} // namespace waves
