#ifndef CLPOSE_CLI_HPP
#define CLPOSE_CLI_HPP

// Command-line front end. run_cli() is the whole tool; tools/clpose.cpp only
// forwards argv. Exit codes: 0 success, 1 operational error, 2 usage error.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "clpose/codec.hpp"
#include "clpose/core.hpp"
#include "clpose/io.hpp"
#include "clpose/loss.hpp"
#include "clpose/metrics.hpp"
#include "clpose/synthfit.hpp"

namespace clpose {

namespace cli {

class UsageError : public Error {
 public:
  using Error::Error;
};

struct GlobalOptions {
  double sigma = 16.0;
  double tau = 0.6;
  std::size_t stride = 16;
  std::string norm_mode = "squared";
  std::string region_source = "ground-truth";
  double omega_h = 0.5;
  double omega_o = 2.0;
  double beta = 1.0;
  std::uint64_t seed = 0;
  std::string profile;
  std::string out;

  CodecConfig codec() const {
    CodecConfig c;
    c.sigma = sigma;
    c.tau = tau;
    c.norm_mode = norm_mode == "literal-l2" ? NormMode::kLiteralL2 : NormMode::kSquaredDistance;
    c.region_source = region();
    c.validate();
    return c;
  }

  RegionSource region() const {
    if (region_source == "predicted") return RegionSource::kPredicted;
    if (region_source == "union") return RegionSource::kUnion;
    return RegionSource::kGroundTruth;
  }

  LossConfig loss() const {
    LossConfig c;
    c.omega_h = omega_h;
    c.omega_o = omega_o;
    c.beta = beta;
    c.tau = tau;
    c.region_source = region();
    c.validate();
    return c;
  }
};

// Source of poses shared by several subcommands: an annotation file, or a
// synthetic dataset generated from --seed.
struct DatasetOptions {
  std::string annotations;
  std::string format = "auto";
  std::size_t count = 100;
  std::size_t keypoints = 1;
  std::size_t width = 256;
  std::size_t height = 256;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--annotations", annotations, "Annotation file (simple-poses or COCO JSON)");
    cmd->add_option("--format", format, "Annotation format")->check(CLI::IsMember({"auto", "simple", "coco"}));
    cmd->add_option("--count", count, "Synthetic instance count when no annotations are given");
    cmd->add_option("--keypoints", keypoints, "Synthetic keypoints per instance");
    cmd->add_option("--width", width, "Synthetic image width");
    cmd->add_option("--height", height, "Synthetic image height");
  }
};

inline AnnotationSet load_annotations(const std::string& path, const std::string& format,
                                      const std::string& profile_flag) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IngestError("malformed JSON in " + path + ": " + e.what());
  }
  const bool coco = format == "coco" || (format == "auto" && doc.is_object() && doc.contains("annotations"));
  if (coco) return ingest_coco(doc, resolve_profile(profile_flag.empty() ? "coco" : profile_flag));
  auto set = simple_from_json(doc);
  if (!profile_flag.empty()) set.profile = profile_flag;
  return set;
}

inline AnnotationSet dataset(const DatasetOptions& d, const GlobalOptions& g) {
  if (!d.annotations.empty()) return load_annotations(d.annotations, d.format, g.profile);
  const GridSpec grid(d.width, d.height, g.stride);
  AnnotationSet set;
  set.profile = synthetic_profile(d.keypoints).name;
  for (auto& pose : gen_dataset(g.seed, d.count, d.keypoints, grid)) {
    ImageEntry e;
    e.id = static_cast<std::int64_t>(set.images.size());
    e.width = d.width;
    e.height = d.height;
    e.instances.push_back(std::move(pose));
    set.images.push_back(std::move(e));
  }
  return set;
}

inline void emit(const GlobalOptions& g, std::ostream& out, const std::string& text) {
  if (g.out.empty()) {
    out << text;
  } else {
    write_file_atomic(g.out, text);
  }
}

inline DecodedPose as_decoded(const PoseInstance& pose) {
  DecodedPose d;
  for (const auto& kp : pose.keypoints) {
    d.coords.push_back(kp.position());
    d.confidence.push_back(1.0);
    d.diagnostics.push_back({1, false});
  }
  return d;
}

inline NoiseModel parse_noise(const std::string& kind, double magnitude, const std::string& units,
                              const std::string& scope, std::uint64_t seed) {
  NoiseModel n;
  n.seed = seed;
  n.magnitude = kind == "none" ? 0.0 : magnitude;
  if (kind == "activation-scaling") n.kind = NoiseKind::kActivationScaling;
  if (kind == "offset-jitter") n.kind = NoiseKind::kOffsetJitter;
  n.units = units == "pixels" ? NoiseUnits::kPixels : NoiseUnits::kStride;
  n.scope = scope == "plane" ? NoiseScope::kPlane : NoiseScope::kCell;
  return n;
}

}  // namespace cli

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"Composite-localization keypoint codec: encode, decode, losses and evaluation", "clpose"};
  app.fallthrough();
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--sigma", g.sigma, "Heatmap spread in pixels");
  app.add_option("--tau", g.tau, "Activation threshold");
  app.add_option("--stride", g.stride, "Downsampling stride S");
  app.add_option("--norm-mode", g.norm_mode, "Heatmap distance")->check(CLI::IsMember({"squared", "literal-l2"}));
  app.add_option("--region-source", g.region_source, "Heatmap thresholded for the offset region")
      ->check(CLI::IsMember({"ground-truth", "predicted", "union"}));
  app.add_option("--omega-h", g.omega_h, "Heatmap loss weight");
  app.add_option("--omega-o", g.omega_o, "Offset loss weight");
  app.add_option("--beta", g.beta, "Smooth-L1 transition point");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--profile", g.profile, "Dataset profile: coco, synthetic-<K> or a profile JSON path");
  app.add_option("--out", g.out, "Output file or directory");

  // encode
  auto* encode_cmd = app.add_subcommand("encode", "Encode annotations into map files (one per instance)");
  DatasetOptions encode_data;
  encode_data.add_to(encode_cmd);

  // decode
  auto* decode_cmd = app.add_subcommand("decode", "Decode a map file into keypoints JSON");
  std::string decode_maps;
  std::string decoder = "composite";
  decode_cmd->add_option("maps", decode_maps, "Map file")->required();
  decode_cmd->add_option("--decoder", decoder, "Decoder")->check(CLI::IsMember({"composite", "argmax"}));

  // roundtrip
  auto* roundtrip_cmd = app.add_subcommand("roundtrip", "Encode, decode and report coordinate errors");
  DatasetOptions roundtrip_data;
  roundtrip_data.add_to(roundtrip_cmd);

  // loss
  auto* loss_cmd = app.add_subcommand("loss", "Evaluate a loss between target and predicted map files");
  std::string loss_target;
  std::string loss_predicted;
  std::string variant = "composite";
  std::optional<double> disk_radius;
  loss_cmd->add_option("--target", loss_target, "Target map file")->required();
  loss_cmd->add_option("--predicted", loss_predicted, "Predicted map file")->required();
  loss_cmd->add_option("--variant", variant, "Loss variant")->check(CLI::IsMember({"composite", "peak-mse", "grmi"}));
  loss_cmd->add_option("--disk-radius", disk_radius, "Positive-disk radius in pixels for grmi (default: stride)");

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference loss gradients");
  std::string grad_target;
  std::string grad_predicted;
  std::size_t grad_pairs = 10;
  std::size_t grad_keypoints = 2;
  std::size_t grad_width = 256;
  std::size_t grad_height = 256;
  double grad_step = 1e-5;
  double grad_tolerance = 1e-4;
  grad_cmd->add_option("--target", grad_target, "Target map file (random pairs when omitted)");
  grad_cmd->add_option("--predicted", grad_predicted, "Predicted map file");
  grad_cmd->add_option("--pairs", grad_pairs, "Number of random pairs");
  grad_cmd->add_option("--keypoints", grad_keypoints, "Keypoints per random pair");
  grad_cmd->add_option("--width", grad_width, "Image width for random pairs");
  grad_cmd->add_option("--height", grad_height, "Image height for random pairs");
  grad_cmd->add_option("--step", grad_step, "Central-difference step");
  grad_cmd->add_option("--tolerance", grad_tolerance, "Maximum accepted relative error");

  // eval-pck
  auto* pck_cmd = app.add_subcommand("eval-pck", "PCK / PCKh of predictions against annotations");
  std::string pck_predictions;
  std::string pck_annotations;
  std::string pck_format = "auto";
  double alpha = 0.2;
  std::string normalizer = "torso";
  double normalizer_value = 0.0;
  pck_cmd->add_option("--predictions", pck_predictions, "Predictions (simple-poses JSON)")->required();
  pck_cmd->add_option("--annotations", pck_annotations, "Ground truth")->required();
  pck_cmd->add_option("--format", pck_format, "Ground-truth format")->check(CLI::IsMember({"auto", "simple", "coco"}));
  pck_cmd->add_option("--alpha", alpha, "Threshold fraction of the normalizer");
  pck_cmd->add_option("--normalizer", normalizer, "Normalizer")->check(CLI::IsMember({"torso", "head", "explicit"}));
  pck_cmd->add_option("--normalizer-value", normalizer_value, "Normalizer in pixels for --normalizer explicit");

  // eval-oks
  auto* oks_cmd = app.add_subcommand("eval-oks", "OKS-based AP / AR of scored predictions");
  std::string oks_predictions;
  std::string oks_annotations;
  std::string oks_format = "auto";
  oks_cmd->add_option("--predictions", oks_predictions, "Scored predictions (simple-poses JSON)")->required();
  oks_cmd->add_option("--annotations", oks_annotations, "Ground truth")->required();
  oks_cmd->add_option("--format", oks_format, "Ground-truth format")->check(CLI::IsMember({"auto", "simple", "coco"}));

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic simple-poses dataset");
  DatasetOptions synth_data;
  synth_cmd->add_option("--count", synth_data.count, "Instance count");
  synth_cmd->add_option("--keypoints", synth_data.keypoints, "Keypoints per instance");
  synth_cmd->add_option("--width", synth_data.width, "Image width");
  synth_cmd->add_option("--height", synth_data.height, "Image height");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit map stacks by gradient descent and report decode errors");
  DatasetOptions fit_data;
  fit_data.count = 10;
  fit_data.add_to(fit_cmd);
  FitConfig fit_config;
  std::string fit_init = "zeros";
  fit_cmd->add_option("--step-size", fit_config.step_size, "Gradient step");
  fit_cmd->add_option("--max-iters", fit_config.max_iters, "Iteration limit");
  fit_cmd->add_option("--stop-loss", fit_config.stop_loss, "Stop once the total loss is below this");
  fit_cmd->add_option("--init", fit_init, "Initialization")->check(CLI::IsMember({"zeros", "noise"}));

  // sweep-stride
  auto* sweep_cmd = app.add_subcommand("sweep-stride", "Decode errors of both decoders across strides (CSV)");
  DatasetOptions sweep_data;
  sweep_data.add_to(sweep_cmd);
  std::vector<std::size_t> strides{4, 8, 16, 32};
  std::string noise_kind = "none";
  double noise_magnitude = 0.0;
  std::string noise_units = "stride";
  std::string noise_scope = "cell";
  sweep_cmd->add_option("--strides", strides, "Strides to evaluate")->delimiter(',');
  sweep_cmd->add_option("--noise-kind", noise_kind, "Noise applied to encoded maps")
      ->check(CLI::IsMember({"none", "gaussian-additive", "activation-scaling", "offset-jitter"}));
  sweep_cmd->add_option("--noise-magnitude", noise_magnitude, "Noise magnitude");
  sweep_cmd->add_option("--noise-units", noise_units, "Offset jitter units")->check(CLI::IsMember({"stride", "pixels"}));
  sweep_cmd->add_option("--noise-scope", noise_scope, "Offset jitter per cell or per plane")
      ->check(CLI::IsMember({"cell", "plane"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (encode_cmd->parsed()) {
      if (g.out.empty()) throw UsageError("encode needs --out <directory>");
      const auto codec = g.codec();
      const auto set = dataset(encode_data, g);
      std::vector<std::pair<std::string, std::string>> files;
      for (std::size_t i = 0; i < set.images.size(); ++i) {
        const auto& img = set.images[i];
        const GridSpec grid(img.width, img.height, g.stride);
        for (std::size_t j = 0; j < img.instances.size(); ++j) {
          files.emplace_back(std::to_string(i) + "_" + std::to_string(j) + ".clm",
                             serialize_maps(encode(img.instances[j], grid, codec)));
        }
      }
      std::filesystem::create_directories(g.out);
      std::vector<std::filesystem::path> written;
      try {
        for (const auto& [name, bytes] : files) {
          written.push_back(std::filesystem::path(g.out) / name);
          write_file_atomic(written.back(), bytes);
        }
      } catch (...) {
        std::error_code ec;
        for (const auto& p : written) std::filesystem::remove(p, ec);
        throw;
      }
      ordered_json report;
      report["files"] = ordered_json::array();
      for (const auto& f : files) report["files"].push_back(f.first);
      out << dump_json(report);
      return 0;
    }

    if (decode_cmd->parsed()) {
      const auto maps = read_maps(decode_maps);
      const auto decoded = decoder == "argmax" ? argmax_decode(maps) : decode(maps, g.codec());
      emit(g, out, dump_json(to_json(decoded)));
      return 0;
    }

    if (roundtrip_cmd->parsed()) {
      const auto codec = g.codec();
      const auto set = dataset(roundtrip_data, g);
      double max_error = 0.0;
      double sum = 0.0;
      double argmax_sum = 0.0;
      std::size_t n = 0;
      std::size_t fallbacks = 0;
      for (const auto& img : set.images) {
        const GridSpec grid(img.width, img.height, g.stride);
        for (const auto& pose : img.instances) {
          const auto maps = encode(pose, grid, codec);
          const auto dec = decode(maps, codec);
          const auto arg = argmax_decode(maps);
          for (std::size_t k = 0; k < pose.size(); ++k) {
            if (!pose.keypoints[k].labeled()) continue;
            const double e = distance(dec.coords[k], pose.keypoints[k].position());
            max_error = std::max(max_error, e);
            sum += e;
            argmax_sum += distance(arg.coords[k], pose.keypoints[k].position());
            fallbacks += dec.diagnostics[k].used_fallback ? 1 : 0;
            ++n;
          }
        }
      }
      ordered_json report;
      report["keypoints"] = n;
      report["max_error"] = max_error;
      report["mean_error"] = n ? sum / static_cast<double>(n) : 0.0;
      report["argmax_mean_error"] = n ? argmax_sum / static_cast<double>(n) : 0.0;
      report["fallback_count"] = fallbacks;
      emit(g, out, dump_json(report));
      return 0;
    }

    if (loss_cmd->parsed()) {
      const auto target = read_maps(loss_target);
      const auto predicted = read_maps(loss_predicted);
      const auto config = g.loss();
      LossReport r;
      if (variant == "peak-mse") {
        r = peak_mse_loss(target, predicted, config);
      } else if (variant == "grmi") {
        r = grmi_loss(target, predicted, config, disk_radius);
      } else {
        r = composite_loss(target, predicted, config);
      }
      auto j = to_json(r);
      j["variant"] = variant;
      emit(g, out, dump_json(j));
      return 0;
    }

    if (grad_cmd->parsed()) {
      const auto config = g.loss();
      GradCheckResult worst;
      std::size_t pairs = 0;
      const auto accumulate = [&](const GradCheckResult& r) {
        worst.max_relative_error = std::max(worst.max_relative_error, r.max_relative_error);
        worst.compared += r.compared;
        worst.excluded += r.excluded;
        ++pairs;
      };
      if (!grad_target.empty() || !grad_predicted.empty()) {
        if (grad_target.empty() || grad_predicted.empty()) throw UsageError("gradcheck needs both --target and --predicted");
        accumulate(finite_diff_check(read_maps(grad_target), read_maps(grad_predicted), config, grad_step));
      } else {
        const GridSpec grid(grad_width, grad_height, g.stride);
        const auto codec = g.codec();
        for (std::size_t i = 0; i < grad_pairs; ++i) {
          const auto pose = gen_dataset(g.seed, i + 1, grad_keypoints, grid).back();
          const auto target = encode(pose, grid, codec);
          accumulate(finite_diff_check(target, random_prediction(target, g.seed + i), config, grad_step));
        }
      }
      const bool pass = worst.max_relative_error < grad_tolerance;
      ordered_json report;
      report["pairs"] = pairs;
      report["max_relative_error"] = worst.max_relative_error;
      report["compared"] = worst.compared;
      report["excluded"] = worst.excluded;
      report["tolerance"] = grad_tolerance;
      report["pass"] = pass;
      emit(g, out, dump_json(report));
      if (!pass) err << "gradient check failed: max relative error " << worst.max_relative_error << "\n";
      return pass ? 0 : 1;
    }

    if (pck_cmd->parsed()) {
      const auto preds = ingest_simple(pck_predictions);
      const auto gts = load_annotations(pck_annotations, pck_format, g.profile);
      if (preds.images.size() != gts.images.size()) throw DataError("predictions and annotations differ in image count");
      NormalizerSpec spec;
      spec.kind = normalizer == "head" ? NormalizerKind::kHead
                                       : (normalizer == "explicit" ? NormalizerKind::kExplicit : NormalizerKind::kTorso);
      spec.value = normalizer_value;
      std::vector<DecodedPose> p;
      std::vector<PoseInstance> t;
      std::vector<double> norms;
      for (std::size_t i = 0; i < gts.images.size(); ++i) {
        if (preds.images[i].instances.size() != gts.images[i].instances.size()) {
          throw DataError("image " + std::to_string(i) + ": prediction and annotation instance counts differ");
        }
        for (std::size_t j = 0; j < gts.images[i].instances.size(); ++j) {
          const auto& gt = gts.images[i].instances[j];
          p.push_back(as_decoded(preds.images[i].instances[j]));
          t.push_back(gt);
          try {
            norms.push_back(resolve_normalizer(gt, spec));
          } catch (const DataError& e) {
            throw DataError("image " + std::to_string(i) + " instance " + std::to_string(j) + ": " + e.what());
          }
        }
      }
      auto j = to_json(pck(p, t, norms, alpha));
      j["alpha"] = alpha;
      j["normalizer"] = normalizer;
      emit(g, out, dump_json(j));
      return 0;
    }

    if (oks_cmd->parsed()) {
      const auto preds = ingest_simple(oks_predictions);
      const auto gts = load_annotations(oks_annotations, oks_format, g.profile);
      if (preds.images.size() != gts.images.size()) throw DataError("predictions and annotations differ in image count");
      const auto profile = resolve_profile(g.profile.empty() ? gts.profile : g.profile);
      std::vector<std::vector<ScoredPose>> dets(preds.images.size());
      std::vector<std::vector<PoseInstance>> truth(gts.images.size());
      for (std::size_t i = 0; i < preds.images.size(); ++i) {
        for (const auto& inst : preds.images[i].instances) {
          dets[i].push_back({as_decoded(inst), inst.score.value_or(1.0)});
        }
        truth[i] = gts.images[i].instances;
      }
      emit(g, out, dump_json(to_json(oks_ap(dets, truth, profile.oks_constants()))));
      return 0;
    }

    if (synth_cmd->parsed()) {
      const auto set = dataset(synth_data, g);
      emit(g, out, dump_json(simple_to_json(set)));
      return 0;
    }

    if (fit_cmd->parsed()) {
      const auto codec = g.codec();
      const auto loss = g.loss();
      fit_config.init = fit_init == "noise" ? FitInit::kNoise : FitInit::kZeros;
      fit_config.seed = g.seed;
      const auto set = dataset(fit_data, g);
      ordered_json instances = ordered_json::array();
      std::size_t converged = 0;
      std::size_t total = 0;
      double max_error = 0.0;
      for (const auto& img : set.images) {
        const GridSpec grid(img.width, img.height, g.stride);
        for (const auto& pose : img.instances) {
          const auto target = encode(pose, grid, codec);
          const auto fit = fit_maps(target, loss, fit_config);
          const auto dec = decode(fit.fitted, codec);
          double err = 0.0;
          for (std::size_t k = 0; k < pose.size(); ++k) {
            if (pose.keypoints[k].labeled()) err = std::max(err, distance(dec.coords[k], pose.keypoints[k].position()));
          }
          max_error = std::max(max_error, err);
          converged += fit.converged ? 1 : 0;
          ++total;
          instances.push_back(ordered_json{{"iterations", fit.iterations},
                                           {"final_loss", fit.trace.back()},
                                           {"converged", fit.converged},
                                           {"diverged", fit.diverged},
                                           {"max_decode_error", err}});
        }
      }
      ordered_json report;
      report["instances"] = total;
      report["converged_fraction"] = total ? static_cast<double>(converged) / static_cast<double>(total) : 0.0;
      report["max_decode_error"] = max_error;
      report["fits"] = std::move(instances);
      emit(g, out, dump_json(report));
      return 0;
    }

    if (sweep_cmd->parsed()) {
      const auto codec = g.codec();
      const auto set = dataset(sweep_data, g);
      if (set.images.empty()) throw DataError("sweep needs at least one image");
      std::vector<PoseInstance> poses;
      for (const auto& img : set.images) {
        if (img.width != set.images.front().width || img.height != set.images.front().height) {
          throw DataError("sweep-stride needs all images to share one size");
        }
        poses.insert(poses.end(), img.instances.begin(), img.instances.end());
      }
      const auto noise = parse_noise(noise_kind, noise_magnitude, noise_units, noise_scope, g.seed);
      const auto rows = stride_sweep(poses, set.images.front().width, set.images.front().height, strides, noise, codec);
      emit(g, out, sweep_csv(rows));
      return 0;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace clpose

#endif  // CLPOSE_CLI_HPP
