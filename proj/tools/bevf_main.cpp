// bevf: command line front end for the BEV trajectory prediction pipeline.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "bevf/bev.hpp"
#include "bevf/config.hpp"
#include "bevf/eval.hpp"
#include "bevf/extract.hpp"
#include "bevf/net.hpp"
#include "bevf/parallel.hpp"
#include "bevf/scenes.hpp"
#include "bevf/train.hpp"

namespace fs = std::filesystem;
using namespace bevf;

namespace {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_input(const std::string& path) {
  if (path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin), {});
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_output(const std::string& path, const std::string& bytes) {
  if (path.empty() || path == "-") {
    std::cout.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::string numbered(const std::string& dir, const char* stem, std::size_t i, const char* ext) {
  char name[64];
  std::snprintf(name, sizeof(name), "%s_%06zu%s", stem, i, ext);
  return (fs::path(dir) / name).string();
}

SceneSequence load_sequence(const std::string& path) {
  std::istringstream in(read_input(path));
  return read_sequence(in);
}

std::string sequence_text(const SceneSequence& seq) {
  std::ostringstream out;
  write_sequence(out, seq);
  return out.str();
}

void check_rate(const SceneSequence& seq, const Config& cfg) {
  if (std::abs(seq.dt_s() - cfg.stack_dt_s) > 1e-9) {
    throw std::invalid_argument("sequence sampled at " + std::to_string(seq.rate_hz) +
                                " Hz does not match stack.dt_s=" + std::to_string(cfg.stack_dt_s) +
                                " (downsample with `ingest --keep-every`)");
  }
}

std::string estimates_csv(const std::vector<std::vector<PositionEstimate>>& per_channel) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << "channel,x,y,peak_p\n";
  for (std::size_t k = 0; k < per_channel.size(); ++k) {
    for (const auto& e : per_channel[k]) out << k << ',' << e.x << ',' << e.y << ',' << e.peak_p << '\n';
  }
  return out.str();
}

void dump_pgms(const std::string& dir, const char* stem, const std::vector<BevGrid>& grids) {
  ensure_dir(dir);
  for (std::size_t i = 0; i < grids.size(); ++i) write_output(numbered(dir, stem, i, ".pgm"), write_image(grids[i]));
}

SampleStack stack_from_tensors(const Tensor& input, const Tensor& output, const GridSpec& spec, double dt) {
  SampleStack s;
  s.input = unstack_grids(input, spec);
  s.target = unstack_grids(output, spec);
  s.d = static_cast<int>(s.input.size());
  s.dt_s = dt;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BEV trajectory prediction: rasterize scenes, train the encoder-decoder, extract positions"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  std::string dump_path;
  int threads = 0;
  app.add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override a configuration key (key=value); repeatable");
  app.add_option("--dump-config", dump_path, "write the effective configuration to this file");
  app.add_option("--threads", threads, "worker threads (default: $BEVF_THREADS or all cores)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "convert a HighD tracks CSV into a sequence file");
  std::string tracks_path;
  double tracks_rate = 25.0;
  int keep_every = 1;
  std::string ingest_out = "-";
  ingest->add_option("--tracks", tracks_path, "tracks CSV")->required();
  ingest->add_option("--rate", tracks_rate, "recording rate in Hz");
  ingest->add_option("--keep-every", keep_every, "keep one frame out of this many");
  ingest->add_option("--out", ingest_out, "output sequence file ('-' for stdout)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic two-stream highway sequence");
  SynthConfig sc;
  std::string synth_out = "-";
  synth->add_option("--seed", sc.seed, "random seed");
  synth->add_option("--vehicles", sc.n_vehicles, "vehicles kept on the road");
  synth->add_option("--lanes", sc.n_lanes, "lanes per direction");
  synth->add_option("--lane-width", sc.lane_width, "lane width (m)");
  synth->add_option("--speed-min", sc.speed_min, "minimum speed (m/s)");
  synth->add_option("--speed-max", sc.speed_max, "maximum speed (m/s)");
  synth->add_option("--lane-change-prob", sc.lane_change_prob, "lane changes per vehicle per second");
  synth->add_option("--duration", sc.duration_s, "duration (s)");
  synth->add_option("--rate", sc.rate_hz, "sample rate (Hz)");
  synth->add_option("--extent-x", sc.extent_x, "study area length (m)");
  synth->add_option("--extent-y", sc.extent_y, "study area width (m)");
  synth->add_option("--out", synth_out, "output sequence file ('-' for stdout)");

  // rasterize
  auto* rasterize = app.add_subcommand("rasterize", "render frames to PGM or a sample to a stack file");
  std::string raster_seq = "-";
  std::string raster_out = "-";
  std::string raster_dir;
  long raster_frame = -1;
  long raster_stack = -1;
  bool raster_all = false;
  rasterize->add_option("--seq", raster_seq, "sequence file ('-' for stdin)");
  auto* frame_opt = rasterize->add_option("--frame", raster_frame, "render one frame to PGM");
  auto* all_opt = rasterize->add_flag("--all", raster_all, "render every frame into --out-dir");
  auto* stack_opt = rasterize->add_option("--stack", raster_stack, "write the sample anchored at this frame");
  frame_opt->excludes(all_opt)->excludes(stack_opt);
  all_opt->excludes(stack_opt);
  rasterize->add_option("--out", raster_out, "output file ('-' for stdout)");
  rasterize->add_option("--out-dir", raster_dir, "output directory for --all");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the network on a sequence");
  std::string train_seq;
  std::string train_out;
  std::string train_log;
  std::string train_init;
  std::size_t train_stride = 1;
  train_cmd->add_option("--seq", train_seq, "training sequence file")->required();
  train_cmd->add_option("--out", train_out, "checkpoint to write")->required();
  train_cmd->add_option("--log", train_log, "loss log CSV (step,loss)");
  train_cmd->add_option("--init", train_init, "resume from this checkpoint");
  train_cmd->add_option("--stride", train_stride, "use every n-th anchor frame");
  auto* lr_opt = train_cmd->add_option("--lr", "learning rate");
  auto* epochs_opt = train_cmd->add_option("--epochs", "epochs");
  auto* tseed_opt = train_cmd->add_option("--seed", "shuffle seed");
  auto* depth_opt = train_cmd->add_option("--depth", "network depth");
  auto* head_opt = train_cmd->add_option("--head", "output head (linear, tanh, clipped_relu)");

  // predict
  auto* predict = app.add_subcommand("predict", "run the network on one sample");
  std::string pred_ckpt;
  std::string pred_stack;
  std::string pred_seq;
  long pred_t = -1;
  std::string pred_out;
  std::string pred_pgm;
  predict->add_option("--ckpt", pred_ckpt, "checkpoint")->required();
  auto* pstack = predict->add_option("--stack", pred_stack, "input stack file");
  auto* pseq = predict->add_option("--seq", pred_seq, "sequence file (with --t)");
  predict->add_option("--t", pred_t, "anchor frame in --seq");
  pstack->excludes(pseq);
  predict->add_option("--out", pred_out, "stack file holding input and predicted channels");
  predict->add_option("--pgm-dir", pred_pgm, "write predicted channels as PGM");

  // extract
  auto* extract = app.add_subcommand("extract", "extract vehicle positions from grids");
  std::string ext_image;
  std::string ext_stack;
  bool ext_input = false;
  std::string ext_out = "-";
  auto* eimage = extract->add_option("--image", ext_image, "PGM image");
  auto* estack = extract->add_option("--stack", ext_stack, "stack file (target channels)");
  eimage->excludes(estack);
  extract->add_flag("--input-channels", ext_input, "with --stack: use the input channels");
  auto* pmin_opt = extract->add_option("--pmin", "probability threshold");
  auto* winw_opt = extract->add_option("--win-w", "half window along x (m)");
  auto* winh_opt = extract->add_option("--win-h", "half window along y (m)");
  extract->add_option("--out", ext_out, "CSV output ('-' for stdout)");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "per-horizon errors on a test sequence");
  std::string eval_ckpt;
  std::string eval_seq;
  std::string eval_out = "-";
  std::string eval_pgm;
  std::string eval_baseline;
  evaluate_cmd->add_option("--ckpt", eval_ckpt, "checkpoint");
  evaluate_cmd->add_option("--seq", eval_seq, "test sequence file")->required();
  evaluate_cmd->add_option("--out", eval_out, "report CSV ('-' for stdout)");
  evaluate_cmd->add_option("--baseline", eval_baseline, "evaluate a baseline instead: zero, cv or target")
      ->check(CLI::IsMember({"zero", "cv", "target"}));
  evaluate_cmd->add_option("--pgm-dir", eval_pgm, "dump predicted channels of the first sample");

  // recurse
  auto* recurse = app.add_subcommand("recurse", "extend the horizon by feeding predictions back");
  std::string rec_ckpt;
  std::string rec_stack;
  std::string rec_seq;
  long rec_t = -1;
  int rec_steps = 1;
  std::string rec_dir;
  recurse->add_option("--ckpt", rec_ckpt, "checkpoint")->required();
  auto* rstack = recurse->add_option("--stack", rec_stack, "input stack file");
  auto* rseq = recurse->add_option("--seq", rec_seq, "sequence file (with --t)");
  recurse->add_option("--t", rec_t, "anchor frame in --seq");
  rstack->excludes(rseq);
  recurse->add_option("--steps", rec_steps, "number of forward passes")->check(CLI::PositiveNumber);
  recurse->add_option("--out-dir", rec_dir, "directory for step_NNNNNN.bin stacks")->required();

  // inspect
  auto* inspect = app.add_subcommand("inspect", "print receptive field, minimum input and parameter count");
  int insp_depth = 0;
  int insp_k = -1;
  int insp_d = -1;
  inspect->add_option("--depth", insp_depth, "network depth")->required()->check(CLI::Range(1, 12));
  inspect->add_option("--base-features", insp_k, "features of the first level");
  inspect->add_option("--channels", insp_d, "input/output channels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "bevf: " << e.what() << "\n" << "run 'bevf --help' for usage\n";
    return 2;
  }

  try {
    Config cfg;
    if (!config_path.empty()) cfg = parse_config(read_input(config_path));
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    auto flag = [&](CLI::Option* opt, const char* key) {
      if (opt->count() > 0) cfg.set(key, opt->as<std::string>());
    };
    flag(lr_opt, "train.lr");
    flag(epochs_opt, "train.epochs");
    flag(tseed_opt, "train.seed");
    flag(depth_opt, "net.depth");
    flag(head_opt, "net.head");
    flag(pmin_opt, "extract.p_min");
    flag(winw_opt, "extract.win_w");
    flag(winh_opt, "extract.win_h");
    if (!dump_path.empty()) write_output(dump_path, dump_config(cfg));
    const int workers = resolve_threads(threads);

    if (*ingest) {
      auto seq = ingest_tracks(read_input(tracks_path), tracks_rate);
      if (keep_every != 1) seq = downsample(seq, keep_every);
      write_output(ingest_out, sequence_text(seq));
    } else if (*synth) {
      write_output(synth_out, sequence_text(synth_highway(sc)));
    } else if (*rasterize) {
      cfg.grid.validate();
      const auto seq = load_sequence(raster_seq);
      if (raster_all) {
        if (raster_dir.empty()) throw std::invalid_argument("--all requires --out-dir");
        dump_pgms(raster_dir, "frame", render_frames(seq.frames, cfg.grid, workers));
      } else if (raster_stack >= 0) {
        write_output(raster_out, write_stack(build_sample(seq, static_cast<std::size_t>(raster_stack),
                                                          cfg.stack_d, cfg.grid)));
      } else {
        if (raster_frame < 0) raster_frame = 0;
        if (static_cast<std::size_t>(raster_frame) >= seq.size()) {
          throw std::out_of_range("frame " + std::to_string(raster_frame) + " out of range (sequence has " +
                                  std::to_string(seq.size()) + " frames)");
        }
        write_output(raster_out, write_image(render_frame(seq.frames[static_cast<std::size_t>(raster_frame)], cfg.grid)));
      }
    } else if (*train_cmd) {
      cfg.validate();
      const auto seq = load_sequence(train_seq);
      check_rate(seq, cfg);
      Checkpoint start;
      if (!train_init.empty()) {
        start = load_checkpoint(read_input(train_init));
        if (start.net.spec != cfg.network_spec()) {
          throw std::invalid_argument("--init checkpoint does not match the configured network");
        }
      } else {
        start.net = build_network(cfg.network_spec(), cfg.net_seed);
      }
      SequenceSamples data(seq, cfg.grid, cfg.stack_d,
                           SequenceSamples::valid_anchors(seq, cfg.stack_d, train_stride));
      std::ostringstream log;
      log << "step,loss\n";
      const auto ckpt = train(std::move(start), data, cfg.train, [&](const TrainLogEntry& e) {
        log << e.step << ',' << e.loss << '\n';
        std::cerr << "step " << e.step << " loss " << e.loss << '\n';
      });
      write_output(train_out, save_checkpoint(ckpt));
      if (!train_log.empty()) write_output(train_log, log.str());
    } else if (*predict || *recurse) {
      const auto ckpt = load_checkpoint(read_input(*predict ? pred_ckpt : rec_ckpt));
      const std::string& stack_path = *predict ? pred_stack : rec_stack;
      const std::string& seq_path = *predict ? pred_seq : rec_seq;
      const long t = *predict ? pred_t : rec_t;
      SampleStack sample;
      if (!stack_path.empty()) {
        sample = read_stack(read_input(stack_path), cfg.grid);
      } else if (!seq_path.empty() && t >= 0) {
        sample = build_sample(load_sequence(seq_path), static_cast<std::size_t>(t), ckpt.net.spec.in_channels,
                              cfg.grid);
      } else {
        throw std::invalid_argument("need --stack, or --seq with --t");
      }
      const Tensor input = stack_grids(sample.input);
      const GridSpec& spec = sample.input.front().spec();
      if (*predict) {
        const Tensor out = forward(ckpt.net, input);
        if (!pred_out.empty()) write_output(pred_out, write_stack(stack_from_tensors(input, out, spec, sample.dt_s)));
        if (!pred_pgm.empty()) dump_pgms(pred_pgm, "channel", unstack_grids(out, spec));
      } else {
        ensure_dir(rec_dir);
        Tensor current = input;
        const auto outputs = recursive_predict(ckpt.net, input, rec_steps);
        for (std::size_t s = 0; s < outputs.size(); ++s) {
          write_output(numbered(rec_dir, "step", s, ".bin"),
                       write_stack(stack_from_tensors(current, outputs[s], spec, sample.dt_s)));
          // Mirror recursive_predict's input update for the record.
          Tensor next(current.channels(), current.rows(), current.cols());
          for (int ch = 0; ch + 1 < current.channels(); ++ch) {
            auto src = current.channel(ch + 1);
            std::copy(src.begin(), src.end(), next.channel(ch).begin());
          }
          auto first = outputs[s].channel(0);
          std::copy(first.begin(), first.end(), next.channel(current.channels() - 1).begin());
          current = std::move(next);
        }
      }
    } else if (*extract) {
      cfg.extract.validate();
      std::vector<BevGrid> grids;
      if (!ext_image.empty()) {
        grids.push_back(read_image(read_input(ext_image), cfg.grid));
      } else if (!ext_stack.empty()) {
        auto s = read_stack(read_input(ext_stack), cfg.grid);
        grids = ext_input ? s.input : s.target;
      } else {
        throw std::invalid_argument("need --image or --stack");
      }
      std::vector<std::vector<PositionEstimate>> per_channel;
      for (const auto& g : grids) per_channel.push_back(extract_positions(g, cfg.extract));
      write_output(ext_out, estimates_csv(per_channel));
    } else if (*evaluate_cmd) {
      const auto seq = load_sequence(eval_seq);
      EvalConfig ec;
      ec.grid = cfg.grid;
      ec.d = cfg.stack_d;
      ec.extract = cfg.extract;
      ec.stride = cfg.eval_stride;
      ec.max_distance = cfg.eval_max_distance;
      ec.threads = workers;
      Checkpoint ckpt;
      Predictor predictor;
      if (eval_baseline == "zero") {
        predictor = zero_motion_predictor();
      } else if (eval_baseline == "cv") {
        predictor = constant_velocity_predictor(cfg.grid);
      } else if (eval_baseline == "target") {
        predictor = target_predictor();
      } else {
        if (eval_ckpt.empty()) throw std::invalid_argument("evaluate needs --ckpt or --baseline");
        ckpt = load_checkpoint(read_input(eval_ckpt));
        if (ckpt.net.spec.in_channels != cfg.stack_d) {
          throw std::invalid_argument("checkpoint channels do not match stack.d");
        }
        predictor = network_predictor(ckpt.net);
      }
      check_rate(seq, cfg);
      const auto report = evaluate(seq, ec, predictor);
      std::ostringstream csv;
      write_report_csv(csv, report);
      write_output(eval_out, csv.str());
      if (!eval_pgm.empty()) {
        const auto anchors = SequenceSamples::valid_anchors(seq, ec.d, ec.stride);
        const auto sample = build_sample(seq, anchors.front(), ec.d, ec.grid);
        dump_pgms(eval_pgm, "channel", unstack_grids(predictor(seq, anchors.front(), sample), ec.grid));
      }
    } else if (*inspect) {
      NetSpec spec;
      spec.depth = insp_depth;
      spec.base_features = insp_k > 0 ? insp_k : cfg.net.base_features;
      spec.in_channels = spec.out_channels = insp_d > 0 ? insp_d : cfg.stack_d;
      const auto params = count_params(build_network(spec, 0));
      std::printf("depth,receptive_field,min_input_size,parameters\n");
      std::printf("%d,±%d,%d,%zu (~%zuk)\n", insp_depth, receptive_field(insp_depth),
                  min_input_size(insp_depth), params, (params + 500) / 1000);
    }
  } catch (const IoError& e) {
    std::cerr << "bevf: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "bevf: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
