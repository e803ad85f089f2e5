#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "molcycle/chem.hpp"
#include "molcycle/codec.hpp"
#include "molcycle/dataio.hpp"
#include "molcycle/experiment.hpp"
#include "molcycle/gan.hpp"
#include "molcycle/optimize.hpp"

namespace py = pybind11;
using namespace molcycle;

namespace {

chem::MolGraph parse(const std::string& s) { return chem::parse_smiles(s); }

std::string canonical(const std::string& s) {
  return chem::canonical_smiles(chem::parse_smiles(s));
}

double tanimoto_smiles(const std::string& a, const std::string& b) {
  return chem::tanimoto(chem::morgan_fingerprint(chem::parse_smiles(a)),
                        chem::morgan_fingerprint(chem::parse_smiles(b)));
}

std::vector<int> fingerprint_bits(const std::string& s, int radius, int nbits) {
  auto fp = chem::morgan_fingerprint(chem::parse_smiles(s), radius, nbits);
  std::vector<int> bits;
  for (int i = 0; i < fp.nbits; ++i)
    if (fp.test(i)) bits.push_back(i);
  return bits;
}

experiment::ExperimentConfig config_from_string(const std::string& text) {
  return experiment::config_from_json(nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "CycleGAN molecule optimization in a latent embedding space";

  py::register_exception<config_error>(m, "ConfigError");
  py::register_exception<data_error>(m, "DataError");
  py::register_exception<numeric_error>(m, "NumericError");
  py::register_exception<parse_error>(m, "ParseError");

  // chem
  m.def("canonical_smiles", &canonical, py::arg("smiles"),
        "Canonical form of a SMILES string (internal convention)");
  m.def("tanimoto", &tanimoto_smiles, py::arg("a"), py::arg("b"),
        "Tanimoto similarity of the Morgan fingerprints of two SMILES");
  m.def("fingerprint_bits", &fingerprint_bits, py::arg("smiles"),
        py::arg("radius") = 2, py::arg("nbits") = 2048,
        "Indices of the set fingerprint bits");
  m.def(
      "has_halogen_moiety",
      [](const std::string& s) { return chem::has_halogen_moiety(parse(s)); },
      py::arg("smiles"));
  m.def(
      "count_aromatic_rings",
      [](const std::string& s) { return chem::count_aromatic_rings(parse(s)); },
      py::arg("smiles"));

  // dataio
  m.def("convert_csv", &dataio::convert_csv, py::arg("csv_path"),
        py::arg("jsonl_path"), "Convert a CSV dataset to JSONL; returns row count");

  // models
  py::class_<gan::CycleGanModel>(m, "CycleGanModel")
      .def_property_readonly("latent_dim",
                             [](const gan::CycleGanModel& mdl) { return mdl.latent_dim; })
      .def("g", [](const gan::CycleGanModel& mdl,
                   const nn::Matrix& x) { return nn::forward_eval(mdl.G, x); })
      .def("f", [](const gan::CycleGanModel& mdl,
                   const nn::Matrix& y) { return nn::forward_eval(mdl.F, y); });
  m.def(
      "load_checkpoint",
      [](const std::string& path) { return gan::load_checkpoint(path); },
      py::arg("path"));

  // experiment entry points (config = JSON text, same schema as the CLI)
  m.def(
      "run_train",
      [](const std::string& config_json) {
        experiment::run_train(config_from_string(config_json));
      },
      py::arg("config_json"));
  m.def(
      "run_evaluate",
      [](const std::string& config_json, const std::string& checkpoint) {
        experiment::run_evaluate(config_from_string(config_json), checkpoint);
      },
      py::arg("config_json"), py::arg("checkpoint"));
}
