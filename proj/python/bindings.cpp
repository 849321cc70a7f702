#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pilot/oful_sim.hpp"
#include "pilot/parallel.hpp"
#include "pilot/replay.hpp"
#include "pilot/report_io.hpp"

namespace py = pybind11;
using namespace pilot;

PYBIND11_MODULE(_pilot_router, m) {
  m.doc() = "Budget-constrained contextual-bandit LLM router (PILOT + ON-MCKP)";
  m.attr("__version__") = kVersion;

  static py::exception<Error> exc_error(m, "RouterError");
  static py::exception<ConfigError> exc_config(m, "RouterConfigError");
  static py::exception<InsufficientBudgetError> exc_budget(m, "InsufficientBudgetError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InsufficientBudgetError& e) {
      py::set_error(exc_budget, e.what());
    } catch (const ConfigError& e) {
      py::set_error(exc_config, e.what());
    } catch (const Error& e) {
      py::set_error(exc_error, e.what());
    }
  });

  // data model
  py::class_<ArmId>(m, "ArmId")
      .def(py::init<>())
      .def_readwrite("index", &ArmId::index)
      .def_readwrite("name", &ArmId::name)
      .def_readwrite("size_rank", &ArmId::size_rank)
      .def("__repr__", [](const ArmId& a) {
        return "ArmId(index=" + std::to_string(a.index) + ", name='" + a.name +
               "', size_rank=" + std::to_string(a.size_rank) + ")";
      });

  py::class_<ArmTokenStats>(m, "ArmTokenStats")
      .def(py::init<>())
      .def_readwrite("input_price", &ArmTokenStats::input_price)
      .def_readwrite("output_price", &ArmTokenStats::output_price)
      .def_readwrite("mean_output_tokens", &ArmTokenStats::mean_output_tokens);

  py::class_<RoutingRecord>(m, "RoutingRecord")
      .def(py::init<>())
      .def_readwrite("query_id", &RoutingRecord::query_id)
      .def_readwrite("embedding", &RoutingRecord::embedding)
      .def_readwrite("scores", &RoutingRecord::scores)
      .def_readwrite("costs", &RoutingRecord::costs)
      .def_readwrite("task_tag", &RoutingRecord::task_tag);

  py::class_<PreferenceRecord>(m, "PreferenceRecord")
      .def(py::init<>())
      .def_readwrite("query_id", &PreferenceRecord::query_id)
      .def_readwrite("embedding", &PreferenceRecord::embedding)
      .def_readwrite("arm_i", &PreferenceRecord::arm_i)
      .def_readwrite("arm_j", &PreferenceRecord::arm_j)
      .def_readwrite("winner", &PreferenceRecord::winner);

  py::class_<DatasetManifest>(m, "DatasetManifest")
      .def(py::init<>())
      .def_readwrite("d_e", &DatasetManifest::d_e)
      .def_readwrite("arms", &DatasetManifest::arms)
      .def_readwrite("token_stats", &DatasetManifest::token_stats);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("records", &Dataset::records)
      .def_readwrite("arms", &Dataset::arms)
      .def_readwrite("d_e", &Dataset::d_e)
      .def_readwrite("split_seed", &Dataset::split_seed)
      .def("num_arms", &Dataset::num_arms)
      .def("__len__", &Dataset::size);

  py::enum_<DatasetFormat>(m, "DatasetFormat")
      .value("jsonl", DatasetFormat::jsonl)
      .value("csv", DatasetFormat::csv);

  py::class_<SplitBuckets>(m, "SplitBuckets")
      .def_readwrite("tuning", &SplitBuckets::tuning)
      .def_readwrite("learning", &SplitBuckets::learning)
      .def_readwrite("deployment", &SplitBuckets::deployment);

  m.def("load_arm_manifest", &load_arm_manifest, py::arg("path"));
  m.def("load_routing_dataset", &load_routing_dataset, py::arg("path"),
        py::arg("format") = DatasetFormat::jsonl, py::arg("manifest_path") = "");
  m.def("write_routing_dataset", &write_routing_dataset, py::arg("dataset"), py::arg("path"),
        py::arg("format") = DatasetFormat::jsonl, py::arg("manifest_path") = "");
  m.def("load_preferences", &load_preferences, py::arg("path"), py::arg("manifest"));
  m.def("write_preferences", &write_preferences, py::arg("prefs"), py::arg("path"));
  m.def("split_buckets", &split_buckets, py::arg("dataset"), py::arg("tuning_n"),
        py::arg("learn_ratio"), py::arg("deploy_ratio"), py::arg("seed"));

  // pretraining
  py::class_<PretrainHyperparams>(m, "PretrainHyperparams")
      .def(py::init<>())
      .def_readwrite("learning_rate", &PretrainHyperparams::learning_rate)
      .def_readwrite("epochs", &PretrainHyperparams::epochs)
      .def_readwrite("margin", &PretrainHyperparams::margin)
      .def_readwrite("seed", &PretrainHyperparams::seed);

  py::class_<Projection>(m, "Projection")
      .def(py::init<>())
      .def_readwrite("W", &Projection::W)
      .def_readwrite("bias", &Projection::bias)
      .def_readwrite("d_m", &Projection::d_m)
      .def("d_e", &Projection::d_e);

  py::class_<ArmEmbeddings>(m, "ArmEmbeddings")
      .def(py::init<>())
      .def_readwrite("theta_pref", &ArmEmbeddings::theta_pref)
      .def_readwrite("accuracy", &ArmEmbeddings::accuracy)
      .def_readwrite("d_m", &ArmEmbeddings::d_m)
      .def("num_arms", &ArmEmbeddings::num_arms);

  py::class_<Pools>(m, "Pools")
      .def_readwrite("positives", &Pools::positives)
      .def_readwrite("negatives", &Pools::negatives);

  py::class_<TripletGradients>(m, "TripletGradients")
      .def_readonly("loss", &TripletGradients::loss)
      .def_readonly("grad_W", &TripletGradients::grad_W)
      .def_readonly("grad_bias", &TripletGradients::grad_bias);

  py::class_<BcePairGradients>(m, "BcePairGradients")
      .def_readonly("loss", &BcePairGradients::loss)
      .def_readonly("p_i", &BcePairGradients::p_i)
      .def_readonly("grad_theta_i", &BcePairGradients::grad_theta_i)
      .def_readonly("grad_theta_j", &BcePairGradients::grad_theta_j);

  py::class_<ModelArtifact>(m, "ModelArtifact")
      .def(py::init<>())
      .def_readwrite("proj", &ModelArtifact::proj)
      .def_readwrite("emb", &ModelArtifact::emb)
      .def_readwrite("arms", &ModelArtifact::arms);

  m.def("build_pools", &build_pools, py::arg("anchor"), py::arg("all"));
  m.def("triplet_loss_gradients", &triplet_loss_gradients, py::arg("W"), py::arg("bias"),
        py::arg("xa"), py::arg("xp"), py::arg("xn"), py::arg("margin"));
  m.def("bce_pair_gradients", &bce_pair_gradients, py::arg("theta_i"), py::arg("theta_j"),
        py::arg("psi"), py::arg("winner_is_i"));
  m.def("init_projection", &init_projection, py::arg("d_m"), py::arg("d_e"), py::arg("seed"));
  m.def("train_projection", &train_projection, py::arg("prefs"), py::arg("d_m"), py::arg("hp"));
  m.def("train_arm_embeddings", &train_arm_embeddings, py::arg("prefs"), py::arg("arms"),
        py::arg("proj"), py::arg("hp"));
  m.def("project", &project, py::arg("proj"), py::arg("x"));
  m.def("mean_triplet_loss", &mean_triplet_loss, py::arg("proj"), py::arg("prefs"),
        py::arg("margin"), py::arg("seed"), py::arg("samples_per_anchor") = 4);
  m.def("save_model_artifact", &save_model_artifact, py::arg("model"), py::arg("path"));
  m.def("load_model_artifact", &load_model_artifact, py::arg("path"));

  // bandit
  py::class_<LambdaRule> lambda_rule(m, "LambdaRule");
  lambda_rule.def_static("inverse_accuracy", &LambdaRule::inverse_accuracy)
      .def_static("fixed", &LambdaRule::fixed, py::arg("value"));
  m.def("lambda_from_accuracy", &lambda_from_accuracy, py::arg("accuracy"));

  py::class_<ArmState>(m, "ArmState")
      .def_readonly("A", &ArmState::A)
      .def_readonly("A_inv", &ArmState::A_inv)
      .def_readonly("b", &ArmState::b)
      .def_readonly("theta_prior", &ArmState::theta_prior)
      .def_readonly("lambda_", &ArmState::lambda)
      .def_readonly("t_updates", &ArmState::t_updates);

  py::class_<PilotRouter::Selection>(m, "Selection")
      .def_readonly("arm", &PilotRouter::Selection::arm)
      .def_readonly("ucb_scores", &PilotRouter::Selection::ucb_scores);

  py::class_<PilotRouter::Posterior>(m, "Posterior")
      .def_readonly("mean", &PilotRouter::Posterior::mean)
      .def_readonly("covariance", &PilotRouter::Posterior::covariance);

  py::class_<PilotRouter>(m, "PilotRouter")
      .def(py::init<const ArmEmbeddings&, double, LambdaRule>(), py::arg("emb"),
           py::arg("alpha"), py::arg("rule") = LambdaRule::inverse_accuracy())
      .def_static("zero_prior", &PilotRouter::zero_prior, py::arg("d_m"), py::arg("num_arms"),
                  py::arg("alpha"))
      .def("num_arms", &PilotRouter::num_arms)
      .def("dim", &PilotRouter::dim)
      .def("alpha", &PilotRouter::alpha)
      .def("set_alpha", &PilotRouter::set_alpha, py::arg("alpha"))
      .def("point_estimate", &PilotRouter::point_estimate, py::arg("arm"))
      .def("expected_reward", &PilotRouter::expected_reward, py::arg("arm"), py::arg("psi"))
      .def("reward_estimates", &PilotRouter::reward_estimates, py::arg("psi"))
      .def("ucb_width", &PilotRouter::ucb_width, py::arg("arm"), py::arg("psi"))
      .def("select_arm", &PilotRouter::select_arm, py::arg("psi"))
      .def("update", &PilotRouter::update, py::arg("arm"), py::arg("psi"), py::arg("reward"))
      .def("posterior", &PilotRouter::posterior, py::arg("arm"))
      .def("arm_state", &PilotRouter::arm_state, py::arg("arm"),
           py::return_value_policy::reference_internal)
      .def("save_checkpoint", &PilotRouter::save_checkpoint, py::arg("path"))
      .def_static("load_checkpoint", &PilotRouter::load_checkpoint, py::arg("path"));

  // baselines
  py::enum_<PolicyKind>(m, "PolicyKind")
      .value("pilot", PolicyKind::pilot)
      .value("linucb", PolicyKind::linucb)
      .value("epoch_greedy", PolicyKind::epoch_greedy)
      .value("explore_only", PolicyKind::explore_only)
      .value("random", PolicyKind::random_arm)
      .value("fixed", PolicyKind::fixed_arm);

  py::class_<PolicySpec>(m, "PolicySpec")
      .def(py::init<>())
      .def_readwrite("kind", &PolicySpec::kind)
      .def_readwrite("alpha", &PolicySpec::alpha)
      .def_readwrite("window", &PolicySpec::window)
      .def_readwrite("arm", &PolicySpec::arm)
      .def_readwrite("seed", &PolicySpec::seed)
      .def_readwrite("lambda_rule", &PolicySpec::lambda_rule);

  py::class_<Policy>(m, "Policy")
      .def("select", &Policy::select, py::arg("psi"))
      .def("update", &Policy::update, py::arg("arm"), py::arg("psi"), py::arg("reward"))
      .def("reward_estimates", &Policy::reward_estimates, py::arg("psi"))
      .def("ucb_width", &Policy::ucb_width, py::arg("arm"), py::arg("psi"))
      .def("posterior_trace", &Policy::posterior_trace, py::arg("arm"))
      .def("num_arms", &Policy::num_arms)
      .def("dim", &Policy::dim)
      .def("name", &Policy::name);

  m.def("make_policy", &make_policy, py::arg("spec"), py::arg("d_m"), py::arg("num_arms"),
        py::arg("emb") = nullptr, py::keep_alive<0, 4>());

  // cost policy
  py::class_<CostPolicyConfig>(m, "CostPolicyConfig")
      .def(py::init<>())
      .def_readwrite("budget", &CostPolicyConfig::budget)
      .def_readwrite("horizon", &CostPolicyConfig::horizon)
      .def_readwrite("bin_size", &CostPolicyConfig::bin_size)
      .def_readwrite("ub", &CostPolicyConfig::ub)
      .def_readwrite("lb", &CostPolicyConfig::lb)
      .def("num_bins", &CostPolicyConfig::num_bins)
      .def("bin_budget", &CostPolicyConfig::bin_budget)
      .def("validate", &CostPolicyConfig::validate);

  py::class_<CostPolicyState>(m, "CostPolicyState")
      .def(py::init<>())
      .def_readwrite("z", &CostPolicyState::z)
      .def_readwrite("z_raw", &CostPolicyState::z_raw)
      .def_readwrite("budget_left", &CostPolicyState::budget_left)
      .def_readwrite("bin_index", &CostPolicyState::bin_index)
      .def_readwrite("queries_left_in_bin", &CostPolicyState::queries_left_in_bin)
      .def_readwrite("queries_done", &CostPolicyState::queries_done)
      .def_readwrite("spend_total", &CostPolicyState::spend_total);

  py::class_<RatioBounds>(m, "RatioBounds")
      .def_readonly("ub", &RatioBounds::ub)
      .def_readonly("lb", &RatioBounds::lb);

  m.def("make_cost_state", &make_cost_state, py::arg("cfg"));
  m.def("eligibility_threshold", &eligibility_threshold, py::arg("reward_est"), py::arg("z"),
        py::arg("ub"), py::arg("lb"));
  m.def("filter_eligible", &filter_eligible, py::arg("reward_ests"), py::arg("costs"),
        py::arg("state"), py::arg("cfg"));
  m.def("choose", &choose, py::arg("reward_ests"), py::arg("costs"), py::arg("state"),
        py::arg("cfg"));
  m.def("advance_bin", &advance_bin, py::arg("state"), py::arg("cfg"));
  m.def("estimate_bounds", &estimate_bounds, py::arg("tuning"), py::arg("reward_fn"));
  m.def("estimate_query_cost", &estimate_query_cost, py::arg("query_tokens"), py::arg("arm"),
        py::arg("stats"));

  // replay
  py::class_<ReplayOptions>(m, "ReplayOptions")
      .def(py::init<>())
      .def_readwrite("binarize_threshold", &ReplayOptions::binarize_threshold);

  py::class_<SpendStep>(m, "SpendStep")
      .def_readonly("t", &SpendStep::t)
      .def_readonly("bin", &SpendStep::bin)
      .def_readonly("arm", &SpendStep::arm)
      .def_readonly("cost", &SpendStep::cost)
      .def_readonly("budget_left", &SpendStep::budget_left)
      .def_readonly("z", &SpendStep::z);

  py::class_<ReplayReport>(m, "ReplayReport")
      .def_readonly("policy_name", &ReplayReport::policy_name)
      .def_readonly("seed", &ReplayReport::seed)
      .def_readonly("steps", &ReplayReport::steps)
      .def_readonly("cumulative_reward", &ReplayReport::cumulative_reward)
      .def_readonly("cumulative_regret", &ReplayReport::cumulative_regret)
      .def_readonly("regret_curve", &ReplayReport::regret_curve)
      .def_readonly("reward_by_step", &ReplayReport::reward_by_step)
      .def_readonly("arm_counts", &ReplayReport::arm_counts)
      .def_readonly("spend_trace", &ReplayReport::spend_trace)
      .def_readonly("deployment_performance", &ReplayReport::deployment_performance)
      .def_readonly("budget_used", &ReplayReport::budget_used)
      .def_readonly("terminated", &ReplayReport::terminated)
      .def_readonly("terminated_at", &ReplayReport::terminated_at);

  py::class_<TuneResult>(m, "TuneResult")
      .def_readonly("best", &TuneResult::best)
      .def_readonly("best_reward", &TuneResult::best_reward)
      .def_readonly("alpha_rewards", &TuneResult::alpha_rewards)
      .def_readonly("window_rewards", &TuneResult::window_rewards);

  py::class_<WindowStats>(m, "WindowStats")
      .def_readonly("mean_reward", &WindowStats::mean_reward)
      .def_readonly("mean_ucb_width", &WindowStats::mean_ucb_width)
      .def_readonly("mean_posterior_trace", &WindowStats::mean_posterior_trace);

  py::class_<ShiftReport>(m, "ShiftReport")
      .def_readonly("before", &ShiftReport::before)
      .def_readonly("during", &ShiftReport::during)
      .def_readonly("after", &ShiftReport::after)
      .def_readonly("reward_series", &ShiftReport::reward_series)
      .def_readonly("width_series", &ShiftReport::width_series)
      .def_readonly("trace_series", &ShiftReport::trace_series)
      .def_readonly("boundary", &ShiftReport::boundary)
      .def_readonly("steps", &ShiftReport::steps);

  py::class_<FractionPoint>(m, "FractionPoint")
      .def_readonly("fraction", &FractionPoint::fraction)
      .def_readonly("performance", &FractionPoint::performance)
      .def_readonly("terminated", &FractionPoint::terminated);

  py::class_<BudgetPoint>(m, "BudgetPoint")
      .def_readonly("budget", &BudgetPoint::budget)
      .def_readonly("mean_performance", &BudgetPoint::mean_performance)
      .def_readonly("stderr_performance", &BudgetPoint::stderr_performance)
      .def_readonly("mean_budget_used", &BudgetPoint::mean_budget_used)
      .def_readonly("terminated_runs", &BudgetPoint::terminated_runs);

  m.def("run_learning", &run_learning, py::arg("policy"), py::arg("proj"), py::arg("data"),
        py::arg("seed"), py::arg("opts") = ReplayOptions{});
  m.def("run_deployment", &run_deployment, py::arg("policy"), py::arg("proj"), py::arg("data"),
        py::arg("cost_cfg"), py::arg("opts") = ReplayOptions{});
  m.def("tune_hyperparams", &tune_hyperparams, py::arg("base"), py::arg("alpha_grid"),
        py::arg("window_grid"), py::arg("proj"), py::arg("tuning"), py::arg("emb"),
        py::arg("seed"), py::arg("num_threads") = 1, py::arg("opts") = ReplayOptions{});
  m.def("learning_size_curve", &learning_size_curve, py::arg("spec"), py::arg("proj"),
        py::arg("emb"), py::arg("learning"), py::arg("deployment"), py::arg("fractions"),
        py::arg("cost_cfg"), py::arg("seed"), py::arg("opts") = ReplayOptions{});
  m.def("distribution_shift_replay", &distribution_shift_replay, py::arg("policy"),
        py::arg("proj"), py::arg("stream_a"), py::arg("stream_b"), py::arg("probe_window"),
        py::arg("opts") = ReplayOptions{});
  m.def("sweep_budget", &sweep_budget, py::arg("spec"), py::arg("proj"), py::arg("emb"),
        py::arg("learning"), py::arg("deployment"), py::arg("budgets"), py::arg("base_cfg"),
        py::arg("seeds"), py::arg("num_threads") = 1, py::arg("opts") = ReplayOptions{});

  // synthetic OFUL validator
  py::class_<LinearBanditInstance>(m, "LinearBanditInstance")
      .def(py::init<>())
      .def_readwrite("theta_star", &LinearBanditInstance::theta_star)
      .def_readwrite("num_actions", &LinearBanditInstance::num_actions)
      .def_readwrite("noise_scale", &LinearBanditInstance::noise_scale)
      .def_readwrite("horizon", &LinearBanditInstance::horizon)
      .def_readwrite("delta", &LinearBanditInstance::delta)
      .def_readwrite("lambda_reg", &LinearBanditInstance::lambda_reg)
      .def("dim", &LinearBanditInstance::dim);

  py::class_<RegretSummary>(m, "RegretSummary")
      .def_readonly("mean_oful", &RegretSummary::mean_oful)
      .def_readonly("stderr_oful", &RegretSummary::stderr_oful)
      .def_readonly("mean_pi", &RegretSummary::mean_pi)
      .def_readonly("stderr_pi", &RegretSummary::stderr_pi)
      .def_readonly("bound_oful", &RegretSummary::bound_oful)
      .def_readonly("bound_pi", &RegretSummary::bound_pi)
      .def_readonly("seeds", &RegretSummary::seeds);

  m.def("confidence_radius", &confidence_radius, py::arg("lambda_reg"), py::arg("s_param"),
        py::arg("noise_scale"), py::arg("delta"), py::arg("log_det_A"), py::arg("dim"));
  m.def("run_linear_ucb", &run_linear_ucb, py::arg("inst"), py::arg("theta_pref"),
        py::arg("s_param"), py::arg("seed"));
  m.def("run_oful", &run_oful, py::arg("inst"), py::arg("seed"));
  m.def("run_pi_oful", &run_pi_oful, py::arg("inst"), py::arg("theta_pref"), py::arg("seed"));
  m.def("bound_value", &bound_value, py::arg("s_param"), py::arg("inst"));
  m.def("run_regret_suite", &run_regret_suite, py::arg("inst"), py::arg("theta_pref"),
        py::arg("num_seeds"), py::arg("seed0"), py::arg("num_threads") = 1);

  m.def("thread_cap_from_env", &thread_cap_from_env);
}
