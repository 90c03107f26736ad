#include "vastopo/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vastopo/edt.hpp"
#include "vastopo/metrics.hpp"
#include "vastopo/parallel.hpp"
#include "vastopo/phantom.hpp"
#include "vastopo/pipeline.hpp"
#include "vastopo/rvol.hpp"
#include "vastopo/seed.hpp"
#include "vastopo/skeleton.hpp"
#include "vastopo/vasgraph.hpp"

namespace vastopo {

namespace {

namespace pl = pipeline;

Dims parse_dims(const std::string& s) {
  std::vector<int> v;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto end = s.find(',', pos);
    if (end == std::string::npos) end = s.size();
    int x = 0;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + end, x);
    if (ec != std::errc() || p != s.data() + end) throw ValueError("bad --dims '" + s + "' (want N or NX,NY,NZ)");
    v.push_back(x);
    pos = end + 1;
  }
  if (v.size() == 1) return {v[0], v[0], v[0]};
  if (v.size() != 3) throw ValueError("bad --dims '" + s + "' (want N or NX,NY,NZ)");
  return {v[0], v[1], v[2]};
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  return f;
}

int class_count_from(const LabelVolume& labels, int flag) {
  if (flag > 0) return flag;
  int m = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) m = std::max(m, int(labels[i]));
  return std::max(m + 1, 2);
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"vastopo: vessel topology encoding, fusion and contrastive training on synthetic phantoms"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all subcommand help");

  std::uint64_t seed = 7;
  int threads = 1;
  app.add_option("--seed", seed, "Root seed")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads (0 = runtime default)")->capture_default_str()->check(CLI::NonNegativeNumber);

  // phantom
  auto* ph = app.add_subcommand("phantom", "Write a synthetic vessel phantom");
  std::string ph_dims = "32", ph_prefix;
  int ph_branches = 2, ph_classes = 3;
  double ph_rmin = 1.5, ph_rmax = 2.5;
  ph->add_option("--dims", ph_dims, "N or NX,NY,NZ")->capture_default_str();
  ph->add_option("--branches", ph_branches)->capture_default_str();
  ph->add_option("--classes", ph_classes)->capture_default_str();
  ph->add_option("--rmin", ph_rmin)->capture_default_str();
  ph->add_option("--rmax", ph_rmax)->capture_default_str();
  ph->add_option("--out-prefix", ph_prefix)->required();

  // edt
  auto* ed = app.add_subcommand("edt", "Exact Euclidean distance of a binary mask");
  std::string ed_mask, ed_out;
  ed->add_option("--mask", ed_mask)->required();
  ed->add_option("--out", ed_out)->required();

  // encode
  auto* en = app.add_subcommand("encode", "Skeleton, keypoints and kNN graph of a vessel mask");
  std::string en_mask, en_out;
  int en_n = 256, en_k = 8, en_d0 = 32;
  en->add_option("--mask", en_mask)->required();
  en->add_option("--n", en_n, "Keypoints")->capture_default_str();
  en->add_option("--k", en_k, "Neighbours")->capture_default_str();
  en->add_option("--d0", en_d0, "Node feature width")->capture_default_str();
  en->add_option("--out", en_out)->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full training loss");
  int gc_scale = 8, gc_seeds = 1;
  std::string gc_fusion = "all", gc_scl = "cats";
  double gc_tol = 1e-4;
  gc->add_option("--scale", gc_scale, "Phantom edge length")->capture_default_str();
  gc->add_option("--fusion", gc_fusion, "all or one variant")->capture_default_str();
  gc->add_option("--scl", gc_scl)->capture_default_str();
  gc->add_option("--seeds", gc_seeds, "Seeds checked, starting at --seed")->capture_default_str();
  gc->add_option("--tol", gc_tol)->capture_default_str();

  // train / ablate share model flags
  pl::BackboneConfig bc;
  std::string fusion = "cross_attention", scl_mode = "cats";
  int classes = 0;
  auto model_flags = [&](CLI::App* s, bool with_fusion) {
    if (with_fusion) {
      s->add_option("--fusion", fusion)->capture_default_str();
      s->add_option("--scl", scl_mode)->capture_default_str();
    }
    s->add_option("--iters", bc.iterations)->capture_default_str();
    s->add_option("--lr", bc.lr)->capture_default_str();
    s->add_option("--lambda", bc.lambda_scl)->capture_default_str();
    s->add_option("--patch", bc.patch_size)->capture_default_str();
    s->add_option("--token-dim", bc.token_dim)->capture_default_str();
    s->add_option("--key-dim", bc.key_dim)->capture_default_str();
    s->add_option("--classes", classes, "Output classes incl. background (0 = from labels)")->capture_default_str();
    s->add_option("--n", bc.keypoints, "Keypoints")->capture_default_str();
    s->add_option("--k", bc.knn_k, "Neighbours")->capture_default_str();
    s->add_option("--tau", bc.scl.temperature)->capture_default_str();
    s->add_option("--percentile", bc.scl.percentile)->capture_default_str();
    s->add_option("--capacity", bc.scl.capacity)->capture_default_str();
  };

  auto* tr = app.add_subcommand("train", "Train the toy backbone on a phantom");
  std::string tr_prefix, tr_out, tr_log;
  tr->add_option("--phantom-prefix", tr_prefix)->required();
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--log", tr_log, "CSV loss log");
  model_flags(tr, true);

  auto* in = app.add_subcommand("infer", "Label a volume with a checkpoint");
  std::string in_ckpt, in_ct, in_vessel, in_out;
  in->add_option("--ckpt", in_ckpt)->required();
  in->add_option("--ct", in_ct)->required();
  in->add_option("--vessel", in_vessel);
  in->add_option("--out", in_out)->required();

  auto* ev = app.add_subcommand("eval", "Overlap metrics of a prediction");
  std::string ev_pred, ev_gt, ev_json;
  int ev_classes = 0;
  ev->add_option("--pred", ev_pred)->required();
  ev->add_option("--gt", ev_gt)->required();
  ev->add_option("--json", ev_json, "Report path (default: stdout)");
  ev->add_option("--classes", ev_classes, "Foreground classes (0 = largest label)")->capture_default_str();

  auto* ab = app.add_subcommand("ablate", "Train and score every fusion x scl combination");
  std::string ab_prefix, ab_out;
  bool ab_no_vessel = false;
  ab->add_option("--phantom-prefix", ab_prefix)->required();
  ab->add_option("--out", ab_out)->required();
  ab->add_flag("--no-vessel", ab_no_vessel, "Do not load the vessel mask (fusion none only)");
  std::string ab_fusions = "all", ab_scls = "all";
  ab->add_option("--fusion", ab_fusions, "all or a comma list")->capture_default_str();
  ab->add_option("--scl", ab_scls, "all or a comma list")->capture_default_str();
  model_flags(ab, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    set_thread_count(threads);
    bc.seed = seed;

    if (*ph) {
      PhantomSpec spec;
      spec.dims = parse_dims(ph_dims);
      spec.seed = seed;
      spec.branch_count = ph_branches;
      spec.class_count = ph_classes;
      spec.tube_radius_range = {ph_rmin, ph_rmax};
      const auto p = make_phantom(spec);
      save_rvol(p.intensity, ph_prefix + ".ct.rvol");
      save_rvol(p.vessel_mask, ph_prefix + ".vessel.rvol");
      save_rvol(p.labels, ph_prefix + ".labels.rvol");
    } else if (*ed) {
      const auto mask = load_label_rvol(ed_mask);
      const auto d = exact_edt(mask);
      FloatVolume f(mask.dims(), 0.0f, mask.spacing());
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(d.dist[i]);
      save_rvol(f, ed_out);
    } else if (*en) {
      const auto mask = load_label_rvol(en_mask);
      if (en_k < 1) throw ValueError("--k must be >= 1");
      const auto d = exact_edt(mask);
      const auto sk = skeletonize(mask);
      const auto kp = sample_keypoints(sk, d, en_n);
      const int n = static_cast<int>(kp.size());
      auto g = n == 1 ? isolated_graph(kp) : build_knn(kp, std::min(en_k, n - 1));
      nn::ParamStore store(derive_seed(seed, "encode"));
      g = init_node_features(std::move(g), store, "node", {kNodeAttributeWidth, 32, en_d0});
      save_graph_json(g, en_out);
    } else if (*gc) {
      std::vector<pl::Fusion> fusions;
      if (gc_fusion == "all") fusions.assign(pl::kAllFusions.begin(), pl::kAllFusions.end());
      else fusions.push_back(pl::parse_fusion(gc_fusion));
      const auto mode = pl::parse_scl_mode(gc_scl);
      if (gc_seeds < 1) throw ValueError("--seeds must be >= 1");
      bool ok = true;
      for (int s = 0; s < gc_seeds; ++s) {
        const auto sd = seed + static_cast<std::uint64_t>(s);
        PhantomSpec spec;
        spec.dims = {gc_scale, gc_scale, gc_scale};
        spec.seed = sd;
        spec.tube_radius_range = {1.0, 1.0};
        const auto p = make_phantom(spec);
        pl::TrainingData data{p.intensity, p.vessel_mask, p.labels};
        for (auto f : fusions) {
          const auto rep = pl::check_pipeline_gradients(data, pl::gradcheck_config(f, mode, sd));
          const bool pass = rep.max_rel_error <= gc_tol;
          ok = ok && pass;
          out << "seed=" << sd << " fusion=" << pl::to_string(f) << " entries=" << rep.entries_checked
              << " max_rel_error=" << g17(rep.max_rel_error) << " worst=" << rep.worst_param << "[" << rep.worst_index << "] "
              << (pass ? "ok" : "FAIL") << "\n";
        }
      }
      if (!ok) {
        err << "gradcheck: relative error above " << g17(gc_tol) << "\n";
        return 2;
      }
    } else if (*tr) {
      auto data = pl::load_phantom_files(tr_prefix, pl::parse_fusion(fusion) != pl::Fusion::None);
      bc.fusion = pl::parse_fusion(fusion);
      bc.scl_mode = pl::parse_scl_mode(scl_mode);
      bc.class_count = class_count_from(data.labels, classes);
      std::ofstream log;
      if (!tr_log.empty()) {
        log = open_out(tr_log);
        log << "iter,ce,scl,total\n";
      }
      auto r = pl::train(data, bc, [&](const pl::LogRow& row) {
        if (log.is_open()) log << row.iter << ',' << g17(row.ce) << ',' << g17(row.scl) << ',' << g17(row.total) << '\n';
      });
      pl::save_checkpoint(r.model, r.bank, tr_out);
      if (!r.log.empty()) out << "final total=" << g17(r.log.back().total) << "\n";
    } else if (*in) {
      auto ck = pl::load_checkpoint(in_ckpt);
      const auto ct = load_float_rvol(in_ct);
      std::optional<LabelVolume> vessel;
      if (!in_vessel.empty()) vessel = load_label_rvol(in_vessel);
      const auto pred = pl::infer(ck.model, ct, vessel ? &*vessel : nullptr);
      save_rvol(pred, in_out);
    } else if (*ev) {
      const auto pred = load_label_rvol(ev_pred);
      const auto gt = load_label_rvol(ev_gt);
      const auto rep = evaluate(pred, gt, ev_classes);
      if (ev_json.empty()) {
        write_report_json(out, rep);
      } else {
        auto f = open_out(ev_json);
        write_report_json(f, rep);
      }
    } else if (*ab) {
      auto parse_list = [](const std::string& s, auto parse, auto all) {
        std::vector<decltype(parse(std::string_view{}))> v;
        if (s == "all") return std::vector(all.begin(), all.end());
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) v.push_back(parse(item));
        return v;
      };
      const auto fusions = parse_list(ab_fusions, pl::parse_fusion, pl::kAllFusions);
      const auto modes = parse_list(ab_scls, pl::parse_scl_mode, pl::kAllSclModes);
      auto data = pl::load_phantom_files(ab_prefix, !ab_no_vessel);
      bc.class_count = class_count_from(data.labels, classes);
      const auto rows = pl::ablate(data, bc, fusions, modes);
      auto f = open_out(ab_out);
      pl::write_ablation_csv(f, rows);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace vastopo
