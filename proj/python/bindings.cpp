#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>

#include "berry/checkpoint.hpp"
#include "berry/config.hpp"
#include "berry/error.hpp"
#include "berry/eval.hpp"
#include "berry/faults.hpp"
#include "berry/rl.hpp"
#include "berry/sysmodel.hpp"

namespace py = pybind11;
using namespace berry;

namespace {

RunConfig make_config(const std::string& yaml, const std::map<std::string, std::string>& overrides) {
  std::vector<Override> ov(overrides.begin(), overrides.end());
  return parse_run_config(yaml, "<python>", ov);
}

py::object json_loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

const VoltageCurve& bundled() {
  static const VoltageCurve c = VoltageCurve::bundled();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the berry_sim core library";
  m.attr("__version__") = kVersion;

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const NumericalError&) {
      throw;
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("ber_at_voltage", [](double v) { return ber_at_voltage(bundled(), v); }, py::arg("v_norm"),
        "Bit error rate of the bundled SRAM curve.");
  m.def("energy_scale_at_voltage", [](double v) { return energy_scale_at_voltage(bundled(), v); },
        py::arg("v_norm"), "Processing energy savings factor of the bundled curve.");
  m.def("bundled_voltage_grid", &bundled_voltage_grid);
  m.def("missions_per_charge", &missions_per_charge, py::arg("success_rate"), py::arg("battery_energy_j"),
        py::arg("flight_energy_j"));

  m.def(
      "quality_of_flight",
      [](const std::string& platform, double v_norm, double success_rate, double distance_m) {
        const auto q = quality_of_flight(platform_preset(platform), bundled(), v_norm, success_rate, distance_m);
        py::dict d;
        d["success_rate"] = q.success_rate;
        d["flight_distance"] = q.flight_distance;
        d["flight_time"] = q.flight_time;
        d["flight_energy"] = q.flight_energy;
        d["missions"] = q.missions;
        d["processing_energy_scale"] = q.processing_energy_scale;
        d["compute_power"] = q.compute_power;
        d["heatsink_mass"] = q.heatsink_mass;
        d["acceleration"] = q.acceleration;
        d["safe_velocity"] = q.safe_velocity;
        d["rotor_power"] = q.rotor_power;
        return d;
      },
      py::arg("platform"), py::arg("v_norm"), py::arg("success_rate"), py::arg("distance_m"));

  m.def(
      "normalize_config",
      [](const std::string& yaml, const std::map<std::string, std::string>& overrides) {
        return serialize_run_config(make_config(yaml, overrides));
      },
      py::arg("yaml") = "", py::arg("overrides") = std::map<std::string, std::string>{},
      "Effective config with every key spelled out.");
  m.def(
      "config_hash",
      [](const std::string& yaml, const std::map<std::string, std::string>& overrides) {
        return config_hash(make_config(yaml, overrides));
      },
      py::arg("yaml") = "", py::arg("overrides") = std::map<std::string, std::string>{});

  m.def(
      "train",
      [](const std::string& yaml, const std::map<std::string, std::string>& overrides) {
        const auto cfg = make_config(yaml, overrides);
        const auto tc = train_config(cfg);
        const auto world = build_world(cfg);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = berry_train(world, tc);
        }
        const auto bytes = encode_checkpoint(Checkpoint{r.net, tc.seed, r.log.total_steps});
        py::dict d;
        d["checkpoint"] = py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        d["log_csv"] = r.log.to_csv();
        d["total_steps"] = r.log.total_steps;
        d["updates"] = r.log.updates;
        return d;
      },
      py::arg("yaml") = "", py::arg("overrides") = std::map<std::string, std::string>{},
      "Trains a policy; returns the encoded checkpoint and the training log.");

  m.def(
      "sweep",
      [](const std::string& yaml, const py::bytes& checkpoint, const std::map<std::string, std::string>& overrides) {
        const auto cfg = make_config(yaml, overrides);
        const std::string raw = checkpoint;
        const auto ckpt = decode_checkpoint(std::vector<std::uint8_t>(raw.begin(), raw.end()));
        auto cc = campaign_config(cfg);
        cc.config_hash = config_hash(cfg);
        const auto world = build_world(cfg);
        const auto platform = load_platform_config(cfg);
        const auto curve = load_curve(cfg);
        CampaignResult r;
        {
          py::gil_scoped_release release;
          r = run_campaign(cc, ckpt.net, world, platform, curve);
        }
        return json_loads(report_to_json(r.report));
      },
      py::arg("yaml"), py::arg("checkpoint"), py::arg("overrides") = std::map<std::string, std::string>{},
      "Runs a voltage campaign and returns the report as a dict.");

  m.def(
      "compare_reports",
      [](const std::string& a_json, const std::string& b_json) {
        const auto deltas = compare_reports(report_from_json(a_json), report_from_json(b_json));
        py::list out;
        for (const auto& d : deltas) {
          py::dict row;
          row["v_norm"] = d.v_norm;
          row["success_delta_pp"] = d.success_delta_pp;
          row["energy_delta_pct"] = d.energy_delta_pct;
          row["missions_delta_pct"] = d.missions_delta_pct;
          row["energy_vs_ref_pct"] = d.energy_vs_ref_pct;
          row["missions_vs_ref_pct"] = d.missions_vs_ref_pct;
          out.append(row);
        }
        return out;
      },
      py::arg("a_json"), py::arg("b_json"));

  m.def(
      "summarize_fault_map",
      [](const std::string& text) {
        const auto s = summarize(parse_fault_map(text, "<python>"));
        py::dict d;
        d["count"] = s.count;
        d["total_bits"] = s.total_bits;
        d["empirical_rate"] = s.empirical_rate;
        d["stuck_one_fraction"] = s.stuck_one_fraction;
        d["faulty_columns"] = s.faulty_columns;
        d["column_histogram"] = s.column_histogram;
        return d;
      },
      py::arg("text"));
}
