#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace fluxonium {

/// Current-phase relation I(phi) = I_c sum_n c_n sin(n phi), n = 1..N.
/// The matching Josephson potential is U(phi) = -E_J sum_n (c_n / n) cos(n phi).
/// c_1 is pinned to 1 so that E_J always refers to the first harmonic.
class CphiRModel {
public:
    explicit CphiRModel(std::vector<double> harmonics, std::string name = "custom");

    static CphiRModel sinusoidal();
    /// sin(phi) - 0.25 sin(2 phi) + 0.05 sin(3 phi)
    static CphiRModel slanted();
    /// sum_{n<=n_terms} (-1)^(n+1) sin(n phi) / n
    static CphiRModel sawtooth(int n_terms = 10);

    std::span<const double> harmonics() const noexcept { return harmonics_; }
    std::size_t order() const noexcept { return harmonics_.size(); }
    const std::string& name() const noexcept { return name_; }

    double current(double phi) const;  ///< I / I_c
    double josephson_potential(double phi, double e_j) const;

    bool operator==(const CphiRModel& other) const { return harmonics_ == other.harmonics_; }

private:
    std::vector<double> harmonics_;
    std::string name_;
};

/// Accepts a model name ("sinusoidal", "slanted", "sawtooth"), an array of
/// harmonics, or {"name": ..., "harmonics": [...]}.
CphiRModel cphir_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CphiRModel& model);

}  // namespace fluxonium
