#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "netchoice/ambassador.hpp"
#include "netchoice/cascade.hpp"
#include "netchoice/choice.hpp"
#include "netchoice/error.hpp"
#include "netchoice/estimate.hpp"
#include "netchoice/herding.hpp"
#include "netchoice/lp_format.hpp"
#include "netchoice/model.hpp"
#include "netchoice/pricing.hpp"
#include "report.hpp"

namespace netchoice::cli {

namespace {

struct Options {
    std::string model_path;
    std::uint64_t seed = default_seed;
    Format format = Format::table;
    unsigned threads = 1;
    std::string out_path;

    std::string solver = "dense";
    std::string choice;
    std::size_t budget = 1;
    bool lazy = false;
    bool oracle = false;
    bool emit_model = false;
    std::size_t samples = 100'000;
    bool joint = false;
    std::string u_choice;
    std::size_t d_max = 10;
    std::size_t m_max = 4;
    std::vector<std::size_t> bins{2};
    std::size_t total = 1000;
    std::size_t trials = 10'000;
    std::string firm;
    bool equilibrium = false;
    double tol = 1e-8;
    double damping = 0.5;
    std::size_t max_rounds = 500;
    std::string observed_path;
    std::string knowledge_path;
    std::string phase = "phase1";
};

/// A run whose output is still emitted but whose status is not success.
struct Outcome {
    Report report;
    int code = ok;
    std::string diagnostic;
};

long long as_count(std::size_t v) { return static_cast<long long>(v); }

NetworkModel require_model(const Options& o) {
    if (o.model_path.empty()) throw DomainError("--model is required for this command");
    return load_model(o.model_path);
}

std::size_t resolve_choice(const NetworkModel& model, const std::string& id) {
    return id.empty() ? 0 : model.choice_index(id);
}

std::string join_agents(const NetworkModel& model, const std::vector<std::size_t>& idx) {
    std::vector<std::string> ids;
    for (auto i : idx) ids.push_back(model.agents()[i]);
    return fmt::format("{}", fmt::join(ids, " "));
}

Outcome cmd_validate(const Options& o) {
    const auto model = require_model(o);
    const auto report = validate(model);
    Outcome r;
    r.report.command = "validate";
    r.report.set("agents", as_count(model.num_agents()));
    r.report.set("choices", as_count(model.num_choices()));
    r.report.set("collectively_decisive", report.collectively_decisive);
    r.report.set("spectral_radius_estimate", report.spectral_radius_estimate);
    r.report.set("max_row_residual", report.row_sum_residuals.cwiseAbs().maxCoeff());
    auto& t = r.report.add_table("unreachable_agents", {"agent"});
    for (auto i : report.unreachable_agents) t.rows.push_back({model.agents()[i]});
    if (!report.collectively_decisive) {
        r.code = invalid;
        r.diagnostic = report.decisive_agents.empty()
                           ? "validation failed: no agent selects a choice directly"
                           : fmt::format("validation failed: agents without a path to a decisive agent: {}",
                                         join_agents(model, report.unreachable_agents));
    }
    return r;
}

Outcome cmd_shares(const Options& o) {
    const auto model = require_model(o);
    const auto sol = solve_choice_matrix(model, o.solver == "iterative" ? Solver::iterative : Solver::dense);
    Outcome r;
    r.report.command = "shares";
    r.report.set("solver", o.solver);
    r.report.set("ill_conditioned", sol.ill_conditioned);
    r.report.set("iterations", static_cast<long long>(sol.iterations));
    std::vector<std::string> cols{"agent"};
    for (const auto& c : model.choices()) cols.push_back(c);
    auto& pi = r.report.add_table("choice_probabilities", cols);
    for (Eigen::Index i = 0; i < sol.pi.rows(); ++i) {
        std::vector<Cell> row{model.agents()[static_cast<std::size_t>(i)]};
        for (Eigen::Index j = 0; j < sol.pi.cols(); ++j) row.emplace_back(sol.pi(i, j));
        pi.rows.push_back(std::move(row));
    }
    auto& cs = r.report.add_table("choice_shares", {"choice", "share"});
    for (Eigen::Index j = 0; j < sol.choice_shares.size(); ++j)
        cs.rows.push_back({model.choices()[static_cast<std::size_t>(j)], sol.choice_shares[j]});
    auto& ag = r.report.add_table("agents", {"agent", "centrality", "decisiveness", "decision_share"});
    for (Eigen::Index i = 0; i < sol.centrality.size(); ++i)
        ag.rows.push_back({model.agents()[static_cast<std::size_t>(i)], sol.centrality[i], sol.decisiveness[i],
                           sol.decision_shares[i]});
    return r;
}

Outcome cmd_ambassadors(const Options& o) {
    const auto model = require_model(o);
    const auto j = resolve_choice(model, o.choice);
    const auto plan = greedy_select(model, j, model.endowment(), o.budget, o.lazy);
    Outcome r;
    r.report.command = "ambassadors";
    r.report.set("target_choice", model.choices()[j]);
    r.report.set("budget", as_count(o.budget));
    r.report.set("lazy", o.lazy);
    r.report.set("baseline_share", plan.baseline_share);
    r.report.set("final_share", plan.final_share);
    r.report.set("gain_evaluations", as_count(plan.gain_evaluations));
    auto& t = r.report.add_table("selection", {"step", "agent", "marginal_gain", "share_after"});
    double share = plan.baseline_share;
    for (std::size_t s = 0; s < plan.selected.size(); ++s) {
        share += plan.marginal_gains[s];
        t.rows.push_back({as_count(s + 1), model.agents()[plan.selected[s]], plan.marginal_gains[s], share});
    }
    if (o.oracle) {
        const auto bf = brute_force_select(model, j, model.endowment(), o.budget);
        std::set<std::size_t> greedy(plan.selected.begin(), plan.selected.end());
        bool matches = false;
        for (const auto& s : bf.optimal_exact_budget) matches = matches || std::set<std::size_t>(s.begin(), s.end()) == greedy;
        r.report.set("oracle_value", bf.best_value_exact_budget);
        r.report.set("oracle_subsets", as_count(bf.subsets_evaluated));
        r.report.set("greedy_ratio", bf.best_value_exact_budget > 0.0 ? plan.final_share / bf.best_value_exact_budget : 1.0);
        r.report.set("greedy_is_optimal", matches);
        auto& opt = r.report.add_table("oracle_optima", {"rank", "agents"});
        for (std::size_t s = 0; s < bf.optimal_exact_budget.size(); ++s)
            opt.rows.push_back({as_count(s + 1), join_agents(model, bf.optimal_exact_budget[s])});
    }
    if (o.emit_model) r.report.model_document = serialize_model(apply_ambassadors(model, plan.selected, j));
    return r;
}

Outcome cmd_simulate(const Options& o) {
    const auto model = require_model(o);
    if (o.samples < 1) throw DomainError("--samples must be at least 1");
    const Matrix pi = solve_choice_matrix(model).pi;
    Outcome r;
    r.report.command = "simulate";
    r.report.set("samples", as_count(o.samples));
    r.report.set("seed", static_cast<long long>(o.seed));
    if (!o.joint) {
        const auto est = estimate_choice_probs_mc(model, o.samples, o.seed, o.threads);
        double max_err = 0.0;
        double max_z = 0.0;
        auto& t = r.report.add_table("estimate", {"agent", "choice", "estimate", "standard_error", "closed_form"});
        for (Eigen::Index i = 0; i < pi.rows(); ++i) {
            for (Eigen::Index j = 0; j < pi.cols(); ++j) {
                const double err = std::abs(est.probabilities(i, j) - pi(i, j));
                max_err = std::max(max_err, err);
                if (est.standard_errors(i, j) > 0.0) max_z = std::max(max_z, err / est.standard_errors(i, j));
                t.rows.push_back({model.agents()[static_cast<std::size_t>(i)], model.choices()[static_cast<std::size_t>(j)],
                                  est.probabilities(i, j), est.standard_errors(i, j), pi(i, j)});
            }
        }
        r.report.set("max_abs_error", max_err);
        r.report.set("max_standard_errors", max_z);
        return r;
    }
    std::optional<std::size_t> u;
    if (!o.u_choice.empty()) u = model.choice_index(o.u_choice);
    const auto s = summarize_joint(model, o.samples, o.seed, u, o.threads);
    r.report.set("accepted", as_count(s.accepted));
    r.report.set("rejected_cycle", as_count(s.rejected_cycle));
    r.report.set("rejected_u_rule", as_count(s.rejected_u_rule));
    r.report.set("rejection_rate", s.rejection_rate());
    r.report.set("max_abs_discrepancy", s.max_abs_discrepancy);
    auto& t = r.report.add_table("joint_marginals", {"agent", "choice", "marginal", "closed_form", "discrepancy"});
    for (Eigen::Index i = 0; i < pi.rows(); ++i)
        for (Eigen::Index j = 0; j < pi.cols(); ++j)
            t.rows.push_back({model.agents()[static_cast<std::size_t>(i)], model.choices()[static_cast<std::size_t>(j)],
                              s.marginals(i, j), pi(i, j), s.discrepancy(i, j)});
    return r;
}

Outcome cmd_herding_moments(const Options& o) {
    const auto table = herd_moments(o.d_max, o.m_max);
    Outcome r;
    r.report.command = "herding moments";
    r.report.set("d_max", as_count(o.d_max));
    r.report.set("m_max", as_count(o.m_max));
    r.report.set("max_recurrence_discrepancy", table.max_discrepancy());
    std::vector<std::string> cols{"d"};
    for (std::size_t m = 1; m <= o.m_max; ++m) cols.push_back(fmt::format("M{}", m));
    auto& t = r.report.add_table("moments", cols);
    for (std::size_t d = 1; d <= o.d_max; ++d) {
        std::vector<Cell> row{as_count(d)};
        for (std::size_t m = 1; m <= o.m_max; ++m) row.emplace_back(table(d, m));
        t.rows.push_back(std::move(row));
    }
    return r;
}

Outcome cmd_herding_simulate(const Options& o) {
    Outcome r;
    r.report.command = "herding simulate";
    r.report.set("total", as_count(o.total));
    r.report.set("trials", as_count(o.trials));
    r.report.set("seed", static_cast<long long>(o.seed));
    auto& t = r.report.add_table("urn", {"bins", "mean", "standard_error", "q05", "q20", "q80", "q95", "asymptotic"});
    for (auto d : o.bins) {
        const auto s = simulate_urn(d, o.total, o.trials, o.seed, o.threads);
        t.rows.push_back({as_count(d), s.mean, s.standard_error, s.quantiles[0], s.quantiles[1], s.quantiles[2],
                          s.quantiles[3], expected_max_herd_fraction(d)});
    }
    return r;
}

Outcome cmd_price(const Options& o) {
    if (o.model_path.empty()) throw DomainError("--model is required for this command");
    const auto pm = load_parametric_model(o.model_path);
    const Vector& w = pm.base().endowment();
    const auto& base = pm.base();
    Outcome r;
    r.report.command = "price";
    auto firm_name = [&](std::size_t f) { return base.choices()[pm.firms()[f].choice]; };
    auto profit_cell = [](const Profit& p) -> Cell {
        return p.defined() ? Cell{p.value()} : Cell{std::string("undefined")};
    };

    const bool equilibrium = o.equilibrium || (o.firm.empty() && pm.num_firms() >= 2);
    if (!equilibrium) {
        std::size_t f = 0;
        if (!o.firm.empty()) {
            const auto j = base.choice_index(o.firm);
            auto it = std::find_if(pm.firms().begin(), pm.firms().end(), [j](const Firm& x) { return x.choice == j; });
            if (it == pm.firms().end()) throw DomainError(fmt::format("choice '{}' is not sold by a firm", o.firm));
            f = static_cast<std::size_t>(it - pm.firms().begin());
        }
        Vector z = pm.clamped_origin();
        const double br = best_response(pm, f, z, w, o.tol);
        z[static_cast<Eigen::Index>(f)] = br;
        r.report.set("firm", firm_name(f));
        r.report.set("best_response", br);
        r.report.set("profit", profit_cell(profit(pm, f, z, w)));
        r.report.set("share", parametric_share(pm, z, pm.firms()[f].choice, w));
        return r;
    }
    const auto eq = find_equilibrium(pm, w, o.damping, o.tol, o.max_rounds);
    r.report.set("converged", eq.converged);
    r.report.set("residual", eq.residual);
    r.report.set("rounds", as_count(eq.rounds));
    auto& t = r.report.add_table("equilibrium", {"firm", "discount", "profit", "share"});
    for (std::size_t f = 0; f < pm.num_firms(); ++f)
        t.rows.push_back({firm_name(f), eq.z[static_cast<Eigen::Index>(f)], profit_cell(profit(pm, f, eq.z, w)),
                          parametric_share(pm, eq.z, pm.firms()[f].choice, w)});
    std::vector<std::string> cols{"round"};
    for (std::size_t f = 0; f < pm.num_firms(); ++f) cols.push_back(firm_name(f));
    auto& trace = r.report.add_table("trace", cols);
    for (std::size_t k = 0; k < eq.trace.size(); ++k) {
        std::vector<Cell> row{as_count(k + 1)};
        for (Eigen::Index f = 0; f < eq.trace[k].size(); ++f) row.emplace_back(eq.trace[k][f]);
        trace.rows.push_back(std::move(row));
    }
    if (!eq.converged) {
        r.code = failed;
        r.diagnostic = fmt::format("best-response iteration did not converge in {} rounds (residual {:.3e})",
                                   eq.rounds, eq.residual);
    }
    return r;
}

struct EstimationInput {
    ObservedChoices observed;
    std::vector<KnowledgeItem> knowledge;
};

EstimationInput estimation_input(const Options& o) {
    EstimationInput in;
    if (!o.observed_path.empty()) {
        in.observed = parse_observed(read_text_file(o.observed_path));
    } else {
        const auto model = require_model(o);
        in.observed = {model.agents(), model.choices(), solve_choice_matrix(model).pi};
    }
    if (!o.knowledge_path.empty())
        in.knowledge = parse_knowledge(read_text_file(o.knowledge_path), in.observed.agents, in.observed.choices);
    return in;
}

Outcome cmd_estimate(const Options& o) {
    const auto in = estimation_input(o);
    const auto poly = build_polyhedron(in.observed.pi, in.knowledge);
    const auto slack = phase1_min_slack(poly);
    const auto est = interior_point_estimate(poly, slack);
    const auto& agents = in.observed.agents;
    const auto& choices = in.observed.choices;
    Outcome r;
    r.report.command = "estimate";
    r.report.set("knowledge_items", as_count(in.knowledge.size()));
    r.report.set("rows", as_count(poly.program.constraints.size()));
    r.report.set("phase1_objective", slack.objective);
    r.report.set("margin", est.margin);
    r.report.set("rounds", as_count(est.rounds));
    r.report.set("converted_rows", fmt::format("{}", fmt::join(est.converted, " ")));
    auto& p = r.report.add_table("adoption", {"from", "to", "p"});
    for (Eigen::Index i = 0; i < est.p.rows(); ++i)
        for (Eigen::Index k = 0; k < est.p.cols(); ++k)
            if (est.p(i, k) > 0.0)
                p.rows.push_back({agents[static_cast<std::size_t>(i)], agents[static_cast<std::size_t>(k)], est.p(i, k)});
    auto& q = r.report.add_table("direct", {"agent", "choice", "q"});
    for (Eigen::Index i = 0; i < est.q.rows(); ++i)
        for (Eigen::Index j = 0; j < est.q.cols(); ++j)
            q.rows.push_back({agents[static_cast<std::size_t>(i)], choices[static_cast<std::size_t>(j)], est.q(i, j)});
    auto& e = r.report.add_table("slack", {"agent", "choice", "eps_plus", "eps_minus"});
    for (Eigen::Index i = 0; i < slack.eps_plus.rows(); ++i)
        for (Eigen::Index j = 0; j < slack.eps_plus.cols(); ++j)
            if (slack.eps_plus(i, j) > 0.0 || slack.eps_minus(i, j) > 0.0)
                e.rows.push_back({agents[static_cast<std::size_t>(i)], choices[static_cast<std::size_t>(j)],
                                  slack.eps_plus(i, j), slack.eps_minus(i, j)});
    r.report.model_document = serialize_model(estimate_to_model(est, agents, choices));
    return r;
}

std::string cmd_export_lp(const Options& o) {
    const auto in = estimation_input(o);
    const auto poly = build_polyhedron(in.observed.pi, in.knowledge);
    if (o.phase == "feasibility") return write_lp(estimation_program(poly, ExportPhase::feasibility));
    if (o.phase == "phase1") return write_lp(estimation_program(poly, ExportPhase::phase1));
    const auto slack = phase1_min_slack(poly);
    return write_lp(estimation_program(poly, ExportPhase::interior, &slack));
}

void emit(const Options& o, const std::string& text, std::ostream& out) {
    if (o.out_path.empty()) {
        out << text;
        return;
    }
    std::ofstream file(o.out_path, std::ios::binary);
    if (!file) throw DomainError(fmt::format("cannot write '{}'", o.out_path));
    file << text;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Choice shares, ambassador selection, herding, pricing and estimation on recommendation networks",
                 "netchoice"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--model", o.model_path, "Model document (JSON)");
    app.add_option("--seed", o.seed, "Seed for every stochastic command")->capture_default_str();
    const std::map<std::string, Format> formats{
        {"table", Format::table}, {"delimited", Format::delimited}, {"structured", Format::structured}};
    app.add_option("--format", o.format, "Output format")->transform(CLI::CheckedTransformer(formats, CLI::ignore_case))
        ->option_text("table|delimited|structured");
    app.add_option("--threads", o.threads, "Worker threads (0 = all cores); results do not depend on it")
        ->capture_default_str();
    app.add_option("--out", o.out_path, "Write results to this file instead of standard output");

    auto* validate_cmd = app.add_subcommand("validate", "Check structure and collective decisiveness");
    auto* shares = app.add_subcommand("shares", "Choice probabilities, choice shares, centrality and decision shares");
    shares->add_option("--solver", o.solver, "Linear solver for the choice system")->check(CLI::IsMember({"dense", "iterative"}))->capture_default_str();

    auto* amb = app.add_subcommand("ambassadors", "Greedy brand-ambassador selection");
    amb->add_option("--choice", o.choice, "Target choice id (default: first choice)");
    amb->add_option("--budget", o.budget, "Number of ambassadors")->capture_default_str();
    amb->add_flag("--lazy", o.lazy, "Lazy evaluation of stale gains");
    amb->add_flag("--oracle", o.oracle, "Compare against exhaustive enumeration");
    amb->add_flag("--emit-model", o.emit_model, "Include the model with ambassadors applied");

    auto* sim = app.add_subcommand("simulate", "Monte Carlo estimates of the choice probabilities");
    sim->add_option("--samples", o.samples, "Walks per agent, or joint realizations with --joint")->capture_default_str();
    sim->add_flag("--joint", o.joint, "Joint pointer sampler with rejection");
    sim->add_option("--u-choice", o.u_choice, "Choice id standing for non-activation (enables the u-rule)");

    auto* herd = app.add_subcommand("herding", "Largest-herd moments and urn simulation");
    herd->require_subcommand(1);
    auto* moments = herd->add_subcommand("moments", "Table of limiting moments");
    moments->add_option("--dmax", o.d_max, "Largest number of decisive agents")->capture_default_str();
    moments->add_option("--mmax", o.m_max, "Highest moment order")->capture_default_str();
    auto* urn = herd->add_subcommand("simulate", "Polya urn simulation");
    urn->add_option("--bins", o.bins, "One or more numbers of decisive agents")->capture_default_str();
    urn->add_option("--total", o.total, "Agents per trial, including the initial balls")->capture_default_str();
    urn->add_option("--trials", o.trials, "Independent urn runs")->capture_default_str();

    auto* price = app.add_subcommand("price", "Best responses and price equilibrium");
    auto* firm_opt = price->add_option("--firm", o.firm, "Best response of the firm selling this choice");
    price->add_flag("--equilibrium", o.equilibrium, "Search for a pure-strategy equilibrium")->excludes(firm_opt);
    price->add_option("--tol", o.tol, "Stop once every firm is within this distance of its best response")->capture_default_str();
    price->add_option("--damping", o.damping, "Weight of the new best response in each update")->capture_default_str();
    price->add_option("--max-rounds", o.max_rounds, "Round limit before reporting non-convergence")->capture_default_str();

    auto* estimate = app.add_subcommand("estimate", "Estimate P and Q from observed choice probabilities");
    auto* lp = app.add_subcommand("export-lp", "Write an estimation program in LP format");
    for (auto* sub : {estimate, lp}) {
        sub->add_option("--observed", o.observed_path, "Observed probabilities (default: closed form of --model)");
        sub->add_option("--knowledge", o.knowledge_path, "Knowledge document");
    }
    lp->add_option("--phase", o.phase)->check(CLI::IsMember({"feasibility", "phase1", "interior"}))->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    }

    try {
        if (lp->parsed()) {
            emit(o, cmd_export_lp(o), out);
            return ok;
        }
        Outcome result;
        if (validate_cmd->parsed()) result = cmd_validate(o);
        else if (shares->parsed()) result = cmd_shares(o);
        else if (amb->parsed()) result = cmd_ambassadors(o);
        else if (sim->parsed()) result = cmd_simulate(o);
        else if (moments->parsed()) result = cmd_herding_moments(o);
        else if (urn->parsed()) result = cmd_herding_simulate(o);
        else if (price->parsed()) result = cmd_price(o);
        else if (estimate->parsed()) result = cmd_estimate(o);
        emit(o, render(result.report, o.format), out);
        if (!result.diagnostic.empty()) err << result.diagnostic << '\n';
        return result.code;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return invalid;
    } catch (const ModelError& e) {
        err << "error: " << e.what() << '\n';
        return invalid;
    } catch (const AssumptionError& e) {
        err << "error: " << e.what() << '\n';
        return invalid;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return failed;
    }
}

} // namespace netchoice::cli
