#include "bsda/config.hpp"

#include <set>

#include "bsda/error.hpp"
#include "bsda/io.hpp"

namespace bsda {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::ConfigInvalid, what); }

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) invalid(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) invalid("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  const Json& v = j.at(key);
  bool ok = false;
  if constexpr (std::is_same_v<T, bool>) {
    ok = v.is_boolean();
  } else if constexpr (std::is_integral_v<T>) {
    ok = v.is_number_integer() && (std::is_signed_v<T> || v.is_number_unsigned() || v.get<std::int64_t>() >= 0);
  } else {
    ok = v.is_number();
  }
  if (!ok) invalid(std::string("key '") + key + "' has the wrong type");
  out = v.get<T>();
}

}  // namespace

Json to_json(const BsdaConfig& c) {
  Json ablation = {{"boundary_branch", c.ablation.boundary_branch},
                   {"distance_branch", c.ablation.distance_branch},
                   {"classifier", c.ablation.classifier},
                   {"fusion", c.ablation.fusion}};
  return Json{{"image_size", c.image_size},
              {"encoder_widths", c.encoder_widths},
              {"decoder_width", c.decoder_width},
              {"classes", c.classes},
              {"lambda_cls", c.lambda_cls},
              {"lambda_dice", c.lambda_dice},
              {"lambda_boundary", c.lambda_boundary},
              {"lambda_distance", c.lambda_distance},
              {"sigma", c.sigma},
              {"heat_floor", c.heat_floor},
              {"tau", c.tau},
              {"epochs", c.epochs},
              {"lr_seg", c.lr_seg},
              {"lr_cls", c.lr_cls},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"augment", c.augment},
              {"ablation", ablation}};
}

Json to_json(const SynthConfig& c) {
  Json shapes = Json::object();
  for (int k = 0; k < kFazClasses; ++k) {
    const ShapeRange& s = c.shapes[static_cast<std::size_t>(k)];
    shapes[std::string(class_name(static_cast<FazClass>(k)))] = {
        {"radius_min", s.radius_min}, {"radius_max", s.radius_max}, {"amplitude", s.amplitude}};
  }
  return Json{{"image_size", c.image_size},
              {"n_per_class", c.n_per_class},
              {"shapes", shapes},
              {"texture_amplitude", c.texture_amplitude},
              {"seed", c.seed}};
}

BsdaConfig bsda_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"image_size", "encoder_widths", "decoder_width", "classes", "lambda_cls", "lambda_dice",
                  "lambda_boundary", "lambda_distance", "sigma", "heat_floor", "tau", "epochs", "lr_seg", "lr_cls",
                  "batch_size", "seed", "augment", "ablation"},
                 "model config");
  BsdaConfig c;
  read(j, "image_size", c.image_size);
  if (j.contains("encoder_widths")) {
    const Json& w = j.at("encoder_widths");
    if (!w.is_array() || w.size() != 4) invalid("encoder_widths must be an array of 4 integers");
    for (std::size_t i = 0; i < 4; ++i) {
      if (!w[i].is_number_integer()) invalid("encoder_widths must be an array of 4 integers");
      c.encoder_widths[i] = w[i].get<int>();
    }
  }
  read(j, "decoder_width", c.decoder_width);
  read(j, "classes", c.classes);
  read(j, "lambda_cls", c.lambda_cls);
  read(j, "lambda_dice", c.lambda_dice);
  read(j, "lambda_boundary", c.lambda_boundary);
  read(j, "lambda_distance", c.lambda_distance);
  read(j, "sigma", c.sigma);
  read(j, "heat_floor", c.heat_floor);
  read(j, "tau", c.tau);
  read(j, "epochs", c.epochs);
  read(j, "lr_seg", c.lr_seg);
  read(j, "lr_cls", c.lr_cls);
  read(j, "batch_size", c.batch_size);
  read(j, "seed", c.seed);
  read(j, "augment", c.augment);
  if (j.contains("ablation")) {
    const Json& a = j.at("ablation");
    reject_unknown(a, {"boundary_branch", "distance_branch", "classifier", "fusion"}, "ablation");
    read(a, "boundary_branch", c.ablation.boundary_branch);
    read(a, "distance_branch", c.ablation.distance_branch);
    read(a, "classifier", c.ablation.classifier);
    read(a, "fusion", c.ablation.fusion);
  }
  c.validate();
  return c;
}

SynthConfig synth_config_from_json(const Json& j) {
  reject_unknown(j, {"image_size", "n_per_class", "shapes", "texture_amplitude", "seed"}, "synth config");
  SynthConfig c;
  read(j, "image_size", c.image_size);
  read(j, "n_per_class", c.n_per_class);
  read(j, "texture_amplitude", c.texture_amplitude);
  read(j, "seed", c.seed);
  if (j.contains("shapes")) {
    const Json& shapes = j.at("shapes");
    std::set<std::string> names;
    for (int k = 0; k < kFazClasses; ++k) names.insert(std::string(class_name(static_cast<FazClass>(k))));
    reject_unknown(shapes, names, "shapes");
    for (int k = 0; k < kFazClasses; ++k) {
      const std::string name(class_name(static_cast<FazClass>(k)));
      if (!shapes.contains(name)) continue;
      const Json& s = shapes.at(name);
      reject_unknown(s, {"radius_min", "radius_max", "amplitude"}, "shapes." + name);
      ShapeRange& r = c.shapes[static_cast<std::size_t>(k)];
      read(s, "radius_min", r.radius_min);
      read(s, "radius_max", r.radius_max);
      read(s, "amplitude", r.amplitude);
    }
  }
  c.validate();
  return c;
}

Json read_json_file(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) invalid(path.string() + " is not valid JSON");
  if (!j.is_object()) invalid(path.string() + " must hold a JSON object");
  return j;
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace bsda
