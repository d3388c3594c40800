// Regenerates the frozen prompt renderings under prompts/. The test suite
// compares live renderings against these files byte for byte, so rerun this
// only when the wire format itself is meant to change.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "prm/evalbench.hpp"
#include "prm/judge.hpp"
#include "prm/pairs.hpp"
#include "prm/prompts.hpp"
#include "prm/taskenv.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path(".");
  fs::path out_dir = root / "prompts";

  auto env_a = prm::taskenv::TaskGraph::load_file(root / "fixtures" / "fixture_a_notes.json");
  auto env_b = prm::taskenv::TaskGraph::load_file(root / "fixtures" / "fixture_b_shop.json");

  // Context: two steps into the note-taking task, about to save.
  auto st = prm::taskenv::initial_episode(env_a);
  std::vector<std::string> traj;
  for (const char* a : {"open_editor", "type_text"}) {
    traj.push_back(env_a.edge_at(st.current, a).action.text);
    st = prm::taskenv::step(env_a, st, a);
  }
  std::string obs = prm::taskenv::render_observation(env_a, st.current);
  const auto& candidate = env_a.edge_at(st.current, "save_note").action;

  const std::pair<prm::pairs::EvalType, const char*> blocks[] = {
      {prm::pairs::EvalType::H, "judge_h.txt"},   {prm::pairs::EvalType::OS, "judge_os.txt"},
      {prm::pairs::EvalType::E, "judge_e.txt"},   {prm::pairs::EvalType::TR, "judge_tr.txt"},
      {prm::pairs::EvalType::C, "judge_c.txt"},   {prm::pairs::EvalType::Tot, "judge_tot.txt"},
      {prm::pairs::EvalType::Traj, "judge_traj.txt"},
  };
  for (const auto& [type, name] : blocks) {
    std::string text = prm::prompts::render_judge_prompt(
        prm::evalbench::type_block(type), env_a.instruction, obs, traj, candidate.text);
    prm::write_text_file(out_dir / name, text + "\n");
  }

  {
    const auto& decoy = env_a.edge_at(st.current, "reopen_fonts").action;
    std::string text = prm::prompts::render_pairwise_prompt(
        prm::prompts::kBlockTotal, env_a.instruction, obs, traj,
        static_cast<int>(traj.size()) + 1, candidate.text, decoy.text);
    prm::write_text_file(out_dir / "pairwise_tot.txt", text + "\n");
  }

  {
    std::string text = prm::prompts::render_model_prompt(env_a.instruction, obs, traj);
    prm::write_text_file(out_dir / "model.txt", text + "\n");
  }

  // Task-relevance judge request one step into the shopping task.
  {
    auto sb = prm::taskenv::initial_episode(env_b);
    const auto& first = env_b.edge_at(sb.current, "open_search").action;
    sb = prm::taskenv::step(env_b, sb, "open_search");
    prm::judge::JudgeRequest req;
    req.instruction = env_b.instruction;
    req.observation = prm::taskenv::render_observation(env_b, sb.current);
    req.trajectory = {first.text};
    req.action = env_b.edge_at(sb.current, "open_item").action;
    req.prev_action = first;
    req.dimension = prm::judge::Dimension::TR;
    prm::write_text_file(out_dir / "tr_fixture_b.txt", prm::judge::render_prompt(req) + "\n");
  }

  std::printf("wrote goldens to %s\n", out_dir.string().c_str());
  return 0;
}
