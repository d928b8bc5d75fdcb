#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "inrv/dataio.hpp"
#include "inrv/errors.hpp"
#include "inrv/inversion.hpp"
#include "inrv/metrics.hpp"
#include "inrv/run_config.hpp"
#include "inrv/sampler.hpp"
#include "inrv/trainer.hpp"

namespace fs = std::filesystem;
using namespace inrv;

namespace {

constexpr double kGradTolerance = 1e-6;

struct Options {
  std::string config;
  std::string data, ckpt, video, out, latents, mask = "full", mask_param, mode = "slerp-pairs", metric = "all";
  std::optional<std::size_t> index, a, b, steps, height, width, frames, count, threads;
  std::optional<std::uint64_t> seed;
};

void print(const std::string& line) { std::cout << line << '\n' << std::flush; }

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

bool is_rvid(const fs::path& p) { return p.extension() == ".rvid"; }

void save_video(const fs::path& path, const VideoTensor& v) {
  if (is_rvid(path)) {
    write_rvid(path, v);
  } else {
    write_frame_dir(path, v);
  }
}

// A single .rvid, a frame directory, or a dataset directory of .rvid files.
std::vector<VideoTensor> load_videos(const fs::path& path) {
  if (!fs::exists(path)) throw FormatError("'" + path.string() + "' does not exist");
  if (!fs::is_directory(path)) return {read_rvid(path)};
  if (fs::exists(path / "frame_00000.ppm")) return {read_frame_dir(path)};
  return load_dataset(path).videos;
}

VideoTensor load_video(const fs::path& path) {
  auto videos = load_videos(path);
  if (videos.size() != 1) {
    throw UsageError("'" + path.string() + "' holds " + std::to_string(videos.size()) + " videos, expected one");
  }
  return std::move(videos.front());
}

template <class T>
const T& need(const std::optional<T>& v, const char* flag) {
  if (!v) throw UsageError(std::string("missing ") + flag);
  return *v;
}

const std::string& need(const std::string& v, const char* flag) {
  if (v.empty()) throw UsageError(std::string("missing ") + flag);
  return v;
}

class Runner {
 public:
  Runner(Options opt, RunConfig cfg) : opt_(std::move(opt)), cfg_(std::move(cfg)) {}

  int run(const std::string& command) {
    if (opt_.seed) cfg_.set("seed", std::to_string(*opt_.seed));
    if (opt_.threads) cfg_.set("threads", std::to_string(*opt_.threads));
    apply_command_flags(command);
    if (cfg_.threads() > 0) omp_set_num_threads(static_cast<int>(cfg_.threads()));
    std::cout << "# command = " << command << '\n';
    std::istringstream lines(cfg_.resolved());
    for (std::string line; std::getline(lines, line);) std::cout << "# " << line << '\n';
    std::cout << "# config_hash = " << cfg_.hash() << std::endl;

    if (command == "gen-data") return gen_data();
    if (command == "fit-single") return fit_single();
    if (command == "train") return train_cmd();
    if (command == "reconstruct") return reconstruct();
    if (command == "sample") return sample();
    if (command == "interpolate") return interpolate();
    if (command == "invert") return invert_cmd();
    if (command == "superresolve") return superresolve_cmd();
    if (command == "render") return render();
    if (command == "metrics") return metrics();
    if (command == "export-latents") return export_cmd();
    if (command == "gradcheck") return gradcheck_cmd();
    throw UsageError("unknown command '" + command + "'");
  }

 private:
  // Flags that stand for config keys are folded into the config so the
  // logged resolved config reproduces the run.
  void apply_command_flags(const std::string& command) {
    if (command == "gen-data") {
      if (opt_.count) cfg_.set("data_count", std::to_string(*opt_.count));
      if (opt_.frames) cfg_.set("data_frames", std::to_string(*opt_.frames));
      if (opt_.height && opt_.width && *opt_.height != *opt_.width) {
        throw UsageError("BouncingBall frames are square; --height and --width differ");
      }
      if (opt_.height) cfg_.set("data_size", std::to_string(*opt_.height));
      if (opt_.width) cfg_.set("data_size", std::to_string(*opt_.width));
    }
    if (opt_.steps) {
      if (command == "fit-single") cfg_.set("single_steps", std::to_string(*opt_.steps));
      if (command == "invert" || command == "superresolve") cfg_.set("invert_steps", std::to_string(*opt_.steps));
    }
  }

  Model checkpoint() const { return read_checkpoint(need(opt_.ckpt, "--ckpt")); }

  VideoDims dims_for(const Model& m) const {
    VideoDims d = m.meta.train_dims;
    if (opt_.frames) d.frames = *opt_.frames;
    if (opt_.height) d.height = *opt_.height;
    if (opt_.width) d.width = *opt_.width;
    if (d.pixels() == 0) throw UsageError("output size unknown; pass --frames, --height and --width");
    return d;
  }

  int gen_data() {
    const fs::path out = need(opt_.out, "--out");
    const BouncingBallSet set = gen_bouncing_ball(cfg_.bouncing_ball());
    write_dataset(out, set);
    print("wrote " + std::to_string(set.videos.size()) + " videos and " + std::to_string(set.heldout.size()) +
          " held-out videos to " + out.string());
    return 0;
  }

  int fit_single() {
    const VideoTensor video = load_video(need(opt_.video, "--video"));
    SingleInrConfig sc = cfg_.single_inr();
    const auto fit = fit_single_inr(video, sc, &std::cout);
    const VideoTensor recon = render_video(fit.theta, ThetaLayout(sc.arch), video.dims(), cfg_.render_chunk());
    print("psnr=" + fmt("%.4f", psnr(recon, video)));
    if (!opt_.out.empty()) save_video(opt_.out, recon);
    return 0;
  }

  int train_cmd() {
    const fs::path out = need(opt_.out, "--out");
    const Dataset data = load_dataset(need(opt_.data, "--data"));
    const TrainConfig tc = cfg_.train();
    fs::create_directories(out);
    std::ofstream(out / "config.txt") << cfg_.resolved();
    TrainHooks hooks;
    hooks.log = &std::cout;
    hooks.on_stage_end = [&](const Model& m, const StageReport& r) {
      const fs::path path = out / ("stage_" + std::to_string(r.stage + 1) + ".inrv");
      write_checkpoint(path, m);
      print("stage " + std::to_string(r.stage + 1) + " done: " + std::to_string(r.size) + " videos, " +
            std::to_string(r.epochs) + " epochs, mse=" + fmt("%.6g", r.final_mse) + ", wrote " + path.string());
    };
    const Model model = train(data.videos, tc, hooks);
    write_checkpoint(out / "final.inrv", model);
    double sum = 0.0;
    for (std::size_t n = 0; n < data.videos.size(); ++n) {
      sum += psnr(model.render(model.instance_code(n), data.videos[n].dims(), cfg_.render_chunk()), data.videos[n]);
    }
    print("train_psnr=" + fmt("%.4f", sum / static_cast<double>(data.videos.size())));
    print("wrote " + (out / "final.inrv").string());
    return 0;
  }

  int reconstruct() {
    const Model m = checkpoint();
    const std::size_t idx = need(opt_.index, "--index");
    const VideoTensor v = m.render(m.instance_code(idx), dims_for(m), cfg_.render_chunk());
    if (!opt_.video.empty()) print("psnr=" + fmt("%.4f", psnr(v, load_video(opt_.video))));
    save_video(need(opt_.out, "--out"), v);
    return 0;
  }

  int sample() {
    const Model m = checkpoint();
    const fs::path out = need(opt_.out, "--out");
    const LatentSamples s = sample_latents(m, parse_sample_mode(opt_.mode), opt_.count.value_or(4), cfg_.seed());
    fs::create_directories(out);
    std::ofstream(out / "samples.log") << s.log();
    std::cout << s.log();
    std::vector<Tensor> latents;
    const VideoDims dims = dims_for(m);
    for (std::size_t k = 0; k < s.samples.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "sample_%05zu.rvid", k);
      write_rvid(out / name, m.render(s.samples[k].latent, dims, cfg_.render_chunk()));
      latents.push_back(s.samples[k].latent);
    }
    write_latents_csv(out / "latents.csv", latents, m.config.instance_dim);
    return 0;
  }

  int interpolate() {
    const Model m = checkpoint();
    const fs::path out = need(opt_.out, "--out");
    const auto videos = interpolate_videos(m, need(opt_.a, "--a"), need(opt_.b, "--b"), opt_.steps.value_or(8), dims_for(m));
    fs::create_directories(out);
    for (std::size_t k = 0; k < videos.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "interp_%02zu.rvid", k);
      write_rvid(out / name, videos[k]);
    }
    print("wrote " + std::to_string(videos.size()) + " videos to " + out.string());
    return 0;
  }

  MaskParams mask_params(MaskKind kind, const VideoDims& dims) const {
    MaskParams p;
    p.seed = cfg_.seed();
    const std::string& text = opt_.mask_param;
    if (text.empty()) {
      if (kind == MaskKind::LowRes) throw UsageError("--mask lowres needs --mask-param HxW");
      return p;
    }
    try {
      std::size_t used = 0;
      switch (kind) {
        case MaskKind::FirstFrames:
          p.frames = std::stoul(text, &used);
          break;
        case MaskKind::Sparse:
          p.fraction = std::stod(text, &used);
          break;
        case MaskKind::LowRes: {
          const auto x = text.find('x');
          p.low_height = std::stoul(text.substr(0, x), &used);
          p.low_width = x == std::string::npos ? p.low_height : std::stoul(text.substr(x + 1));
          if (x != std::string::npos) used = text.size();
          break;
        }
        default:
          throw UsageError("--mask " + to_string(kind) + " takes no --mask-param");
      }
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::logic_error&) {
      throw UsageError("bad --mask-param '" + text + "' for mask " + to_string(kind));
    }
    (void)dims;
    return p;
  }

  int invert_cmd() {
    const Model m = checkpoint();
    const VideoTensor observed = load_video(need(opt_.video, "--video"));
    const MaskKind kind = parse_mask_kind(opt_.mask);
    const ContextMask mask = build_mask(kind, observed.dims(), mask_params(kind, observed.dims()));
    print("mask=" + to_string(kind) + " S=" + std::to_string(mask.size()) + " of " +
          std::to_string(observed.num_pixels()));
    InvertConfig ic = cfg_.inversion();
    const InversionResult r = invert(m, observed, mask, ic, &std::cout);
    print("context_l1=" + fmt("%.4f", r.context_l1) + " initial_context_l1=" + fmt("%.4f", r.initial_context_l1));
    print("psnr=" + fmt("%.4f", psnr(r.render, observed)));
    if (!opt_.out.empty()) {
      const fs::path out = opt_.out;
      fs::create_directories(out);
      write_latents_csv(out / "latent.csv", {r.latent}, m.config.instance_dim);
      write_rvid(out / "render.rvid", r.render);
    }
    return 0;
  }

  int superresolve_cmd() {
    const Model m = checkpoint();
    const VideoTensor low = load_video(need(opt_.video, "--video"));
    InversionResult details;
    const VideoTensor high = superresolve(m, low, need(opt_.height, "--height"), need(opt_.width, "--width"),
                                          cfg_.inversion(), &details);
    print("context_l1=" + fmt("%.4f", details.context_l1));
    save_video(need(opt_.out, "--out"), high);
    return 0;
  }

  int render() {
    const Model m = checkpoint();
    const auto latents = read_latents_csv(need(opt_.latents, "--latents"));
    const std::size_t idx = opt_.index.value_or(0);
    if (idx >= latents.size()) {
      throw UsageError("--index " + std::to_string(idx) + " outside " + std::to_string(latents.size()) + " latents");
    }
    save_video(need(opt_.out, "--out"), m.render(latents[idx], dims_for(m), cfg_.render_chunk()));
    return 0;
  }

  int metrics() {
    const auto preds = load_videos(need(opt_.video, "--video"));
    const auto truths = load_videos(need(opt_.data, "--data"));
    const std::vector<std::string> names =
        opt_.metric == "all" ? std::vector<std::string>{"psnr", "ssim", "e", "l1"} : std::vector<std::string>{opt_.metric};
    for (const auto& name : names) std::cout << evaluate_metric(name, preds, truths).to_text() << '\n';
    return 0;
  }

  int export_cmd() {
    const Model m = checkpoint();
    export_latents(m, need(opt_.out, "--out"));
    print("wrote " + std::to_string(m.codebook.size()) + " latents to " + opt_.out);
    return 0;
  }

  int gradcheck_cmd() {
    const GradCheckReport r = gradcheck(cfg_.seed());
    print("max_rel_error=" + fmt("%.3e", r.max_rel) + " max_abs_error=" + fmt("%.3e", r.max_abs) +
          " checked=" + std::to_string(r.checked) + " redrawn=" + std::to_string(r.redrawn) + " worst=" + r.worst);
    const bool ok = r.max_rel <= kGradTolerance;
    print(ok ? "gradcheck passed" : "gradcheck FAILED");
    return ok ? 0 : 3;
  }

  Options opt_;
  RunConfig cfg_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypernetwork video representations: training, sampling, inversion and evaluation"};
  app.require_subcommand(1, 1);
  Options opt;
  app.add_option("--config", opt.config, "key = value configuration file");
  app.add_option("--threads", opt.threads, "worker thread cap (0 = all cores)");

  auto sub = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };
  CLI::App* gen = sub("gen-data", "write a BouncingBall dataset");
  CLI::App* fit = sub("fit-single", "fit one standalone field to a video");
  CLI::App* trn = sub("train", "progressive hypernetwork training");
  CLI::App* rec = sub("reconstruct", "render a training video from its code");
  CLI::App* smp = sub("sample", "sample novel latents and render them");
  CLI::App* itp = sub("interpolate", "slerp between two training videos");
  CLI::App* inv = sub("invert", "fit a latent to (part of) a video");
  CLI::App* sup = sub("superresolve", "invert a low-resolution video and render it larger");
  CLI::App* ren = sub("render", "render a latent from a CSV file");
  CLI::App* met = sub("metrics", "compare predictions with ground truth");
  CLI::App* exp = sub("export-latents", "write the instance codes as CSV");
  CLI::App* grd = sub("gradcheck", "finite-difference check of the training gradients");
  (void)grd;

  for (CLI::App* s : {gen, fit, trn, rec, smp, itp, inv, sup, ren, exp, met}) s->add_option("--out", opt.out, "output path");
  for (CLI::App* s : {trn, met}) s->add_option("--data", opt.data, "dataset directory or video");
  for (CLI::App* s : {rec, smp, itp, inv, sup, ren, exp}) s->add_option("--ckpt", opt.ckpt, "checkpoint file");
  for (CLI::App* s : {fit, rec, inv, sup, met}) s->add_option("--video", opt.video, ".rvid file or frame directory");
  for (CLI::App* s : {rec, ren}) s->add_option("--index", opt.index, "codebook entry / CSV row");
  for (CLI::App* s : {fit, itp, inv, sup}) s->add_option("--steps", opt.steps, "optimization steps / path length");
  for (CLI::App* s : {gen, rec, smp, itp, sup, ren}) {
    s->add_option("--height", opt.height, "output height");
    s->add_option("--width", opt.width, "output width");
  }
  for (CLI::App* s : {gen, rec, smp, itp, ren}) s->add_option("--frames", opt.frames, "output frame count");
  for (CLI::App* s : {gen, smp}) s->add_option("--count", opt.count, "number of videos");
  app.add_option("--seed", opt.seed, "seed (overrides the config)");
  itp->add_option("--a", opt.a, "first codebook entry");
  itp->add_option("--b", opt.b, "second codebook entry");
  smp->add_option("--mode", opt.mode, "slerp-pairs or gaussian-fit");
  inv->add_option("--mask", opt.mask, "full, top-half, first-k, endpoints, sparse or lowres");
  inv->add_option("--mask-param", opt.mask_param, "k, fraction, or HxW depending on the mask");
  ren->add_option("--latents", opt.latents, "latent CSV file");
  met->add_option("--metric", opt.metric, "psnr, ssim, e, l1 or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    RunConfig cfg = opt.config.empty() ? RunConfig() : RunConfig::from_file(opt.config);
    return Runner(opt, std::move(cfg)).run(app.get_subcommands().front()->get_name());
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
}
