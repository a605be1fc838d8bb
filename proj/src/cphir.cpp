#include "fluxonium/cphir.hpp"

#include <cmath>

#include "fluxonium/errors.hpp"

namespace fluxonium {

CphiRModel::CphiRModel(std::vector<double> harmonics, std::string name)
    : harmonics_(std::move(harmonics)), name_(std::move(name)) {
    if (harmonics_.empty()) throw DomainError("CphiR needs at least one harmonic", {"harmonics"});
    if (harmonics_.front() != 1.0) {
        throw DomainError("CphiR first harmonic must be exactly 1", {"harmonics"});
    }
    for (double c : harmonics_) {
        if (!std::isfinite(c)) throw DomainError("CphiR harmonic is not finite", {"harmonics"});
    }
}

CphiRModel CphiRModel::sinusoidal() { return CphiRModel({1.0}, "sinusoidal"); }

CphiRModel CphiRModel::slanted() { return CphiRModel({1.0, -0.25, 0.05}, "slanted"); }

CphiRModel CphiRModel::sawtooth(int n_terms) {
    if (n_terms < 1) throw DomainError("sawtooth needs n_terms >= 1", {"n_terms"});
    std::vector<double> c(static_cast<std::size_t>(n_terms));
    for (int n = 1; n <= n_terms; ++n) c[n - 1] = (n % 2 == 1 ? 1.0 : -1.0) / n;
    return CphiRModel(std::move(c), "sawtooth");
}

double CphiRModel::current(double phi) const {
    double sum = 0.0;
    for (std::size_t k = 0; k < harmonics_.size(); ++k) {
        sum += harmonics_[k] * std::sin(double(k + 1) * phi);
    }
    return sum;
}

double CphiRModel::josephson_potential(double phi, double e_j) const {
    double sum = 0.0;
    for (std::size_t k = 0; k < harmonics_.size(); ++k) {
        const double n = double(k + 1);
        sum += harmonics_[k] / n * std::cos(n * phi);
    }
    return -e_j * sum;
}

CphiRModel cphir_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "sinusoidal") return CphiRModel::sinusoidal();
        if (name == "slanted") return CphiRModel::slanted();
        if (name == "sawtooth") return CphiRModel::sawtooth();
        throw ConfigError("unknown CphiR model '" + name + "'");
    }
    if (j.is_array()) return CphiRModel(j.get<std::vector<double>>());
    if (j.is_object()) {
        for (const auto& item : j.items()) {
            if (item.key() != "name" && item.key() != "harmonics") {
                throw ConfigError("cphir: unknown key '" + item.key() + "'");
            }
        }
        if (!j.contains("harmonics")) return cphir_from_json(j.at("name"));
        return CphiRModel(j.at("harmonics").get<std::vector<double>>(),
                          j.value("name", std::string("custom")));
    }
    throw ConfigError("cphir: expected a name, an array or an object");
}

nlohmann::json to_json(const CphiRModel& model) {
    return {{"name", model.name()},
            {"harmonics", std::vector<double>(model.harmonics().begin(), model.harmonics().end())}};
}

}  // namespace fluxonium
