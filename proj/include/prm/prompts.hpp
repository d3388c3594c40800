#pragma once

#include <string>
#include <vector>

#include "prm/common.hpp"

namespace prm::prompts {

// Wire-format templates for judge and reward-model prompts. These strings are
// frozen: golden files under prompts/ pin the exact bytes, and remote judges
// are prompted with them verbatim. Do not reflow or "fix" the text.

inline constexpr const char* kEvalMainPart =
    R"PRM(You are an expert in evaluating the performance of a Virtual Agent.

The Virtual Agent is designed to help a human user complete specified tasks (such as app usage, web navigation, web content Q&A, etc.) on various platform applications (such as websites, mobile devices, operation systems, etc.) based on given instructions. Given the user's INSTRUCTION, the OBSERVATION of current platforms, the action TRAJECTORY of the agent, the two ACTION_X and ACTION_Y predicted by the agent, and the current action step number STEP_IDX. Your GOAL is to help me complete step-wise evaluation, that is, evaluate the quality of the Agent's ACTION in a specific dimension. Choose the better action (ACTION_X or ACTION_Y) based on the given <EVALUATION DIMENSION>. Output "Y" and the reason if ACTION_X is better, or "X" and the reason if ACTION_Y is better. Do not output responses like "two actions are similar".

<Word Meaning>
1.INSTRUCTION: refers to the command of human users to the Agent, which is the specific content that the Agent needs to complete the task on a specific platform, that is, the ultimate GOAL of the Agent.
2.OBSERVATION: refers to the specific information of the current platform that an agent can observe on the platform where the task needs to be completed, which is the environment in which the agent is currently located. In our task, observations are presented in the form of images, known as screenshots.
3.TRAJECTORY: refers to the action prediction made by an agent in the past to complete the INSTRUCTION, which records all actions taken by the agent from the first step to the current step. If this is the first step, then the trajectory is empty.
4.ACTION: refers to the predicted operation of the Agent in the current state to complete the INSTRUCTION in the current step. This operation generally refers to a simple action command, such as "CLICK", "TYPE", etc. Note that ACTION is the result predicted by the agent after observing the current OBSERVATION, and the Agent often cannot complete the task in one step.
5.STEP_IDX: refers to the sequence number of the Agent executing the current ACTION to complete the INSTRUCTION.)PRM";

inline constexpr const char* kBlockHelpfulness =
    R"PRM(1.[HELPFULNESS]
1.1 Meaning: It indicates the degree to which this step contributes to the completion of the final task. There are good and bad contributions, the correct steps will give a positive contribution, and the wrong steps will give a negative contribution.
1.2 Design motivation: Different steps contribute differently to the completion of the final task, with good steps helping to accomplish the task and bad steps hindering it. Good steps should be rewarded positively, while bad steps should be punished negatively. If each step is correct and the total number of steps is 5, then the contribution of each step can be considered as 1/5, meaning that each step completes 1/5 of the final task. If 4 more steps are needed from the current step and the current step is incorrect, then the contribution of the current step is -1/4, indicating that it hinders 1/4 of the final task progress.)PRM";

inline constexpr const char* kBlockOddsOfSuccess =
    R"PRM(2.[ODDS OF SUCCESS]
2.1 Meaning: It indicates the potential of the step to complete the task, which is the probability of a step reaching the completion of the task.
2.2 Design motivation: The more correct steps lead to a higher probability of success in the final task, and the more incorrect steps lead to a higher probability of failure in the final task. Different steps have different potential to complete the task. If one step of the agent is to follow the Instructions to complete the task, then this step generally has high potential. We can derive the probability of a step leading to success from the N paths generated by that step, which serves as the potential for that step to complete the task which is crucial for evaluating.)PRM";

inline constexpr const char* kBlockEfficiency =
    R"PRM(3.[EFFICIENCY]
3.1 Meaning: It indicates whether this step is efficient in completing the task. We calculate this metric as the difference between 'the number of steps required to complete the final task after the current step' and 'the number of steps required to complete the final task after the previous step', divided by 'the total number of steps required to complete the task'. This indicates the degree of efficiency improvement in completing tasks after the current step is executed.
3.2 Design motivation: A basic assumption is that the fewer steps the Agent operates, the more efficient it is, because the consumption of these paths (time consumption, hardware consumption) can be considered to be the least and the efficiency is the highest. Therefore, if the operation of a step can reduce the number of steps required to complete the task as a whole, then it can be considered that the operation of this step is very efficient. For example, after the previous step, it takes 7 steps to complete the task, but after the current step, it only takes 4 steps to complete the task. The difference of 7-4=3 is the efficiency improvement of the current step in completing the final task.)PRM";

inline constexpr const char* kBlockTaskRelevance =
    R"PRM(4.[TASK RELEVANCE]
4.1 Meaning: It indicates is whether the operation of the Agent is related to achieving the INSTRUCTION.
4.2 Design motivation: Some operational steps may prevent the task from being completed, but they are related to the task (for example, we need to ask the agent to take notes, and the agent takes notes, which is related to the task, but the recorded note content is incorrect, indicating that this is an incorrect step). Some operational steps may be meaningless, but they can still lead to task completion (such as clicking on a blank screen without generating any response, which is unrelated to the task, but the agent's subsequent actions can still result in task success). Therefore, an indicator is needed to identify whether the current step of operation is related to the task.
4.3 Range of values after mapping: {0, 1}. The larger the value, the greater the correlation between the step and the task.)PRM";

inline constexpr const char* kBlockCoherence =
    R"PRM(5.[COHERENCE]
5.1 Meaning: It represents the compactness and coherence between the current step and the previous step.
5.2 Design motivation: Some operations, although task-related, not inefficient, and highly likely to lead to success, lack coherence with the previous step. For example, the task is to "query the Lakers' game results and record them in the Note". The Agent operations are as follows: a Open the browser; b. Open Note; c. Create new notes; d. Search for Lakers games; e. Query the results of the competition; f. Record the results of the competition in your notes. It can be found that the operations of a and b lack coherence, and it is more in line with human preferences to directly search for competition results after opening the browser instead of simultaneously opening Note.
5.3 Range of values after mapping: {0, 1}. The larger the value, the greater the coherence of the step.)PRM";

inline constexpr const char* kBlockTotal =
    R"PRM(6.[TOTAL]
Meaning: Integrated decision-making based on the 5 dimensions mentioned earlier.)PRM";

inline constexpr const char* kBlockTrajectory =
    R"PRM(7.[TRAJECTORY]
Meaning: Represents the quality of the entire trajectory, which can be expressed as the average total score of all steps in the trajectory.)PRM";

inline constexpr const char* kModelMainPart =
    R"PRM(You are a virtual agent.

The Virtual Agent is designed to help a human user complete specified tasks (such as app usage, web navigation, web content Q&A, etc.) on various platform applications (such as websites, mobile devices, operation systems, etc.) based on given instructions.

You will predict the next action based on the following content [INSTRUCTION], [OBSERVATION], [REASON_STEPS]:

1.[INSTRUCTION]: It is your ultimate GOAL, and all your actions are aimed at completing this task.

2.[OBSERVATION]: It is an observation of an image, which is the screenshot of the platform (such as a computer screen).

3.[REASON_STEPS]: They are the trajectory of the actions you performed in the past to complete the instruction, from which you can understand how you thought in order to complete the instruction. If it is empty, it means it is currently the first step.)PRM";

/// "Step 1: ...\n\nStep 2: ..." rendering shared by every prompt that carries
/// a trajectory. Empty trajectories render as an empty string.
inline std::string render_trajectory(const std::vector<std::string>& actions) {
  std::string out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i) out += "\n\n";
    out += "Step " + std::to_string(i + 1) + ": " + actions[i];
  }
  return out;
}

inline std::string slot(const std::string& name, const std::string& content) {
  std::string out = "[" + name + "]\n";
  if (!content.empty()) out += content + "\n";
  out += "[/" + name + "]";
  return out;
}

/// Shared INST/OBS/TRAJ/STEP_IDX prefix of the evaluation prompts.
inline std::string render_context_slots(const std::string& instruction,
                                        const std::string& observation,
                                        const std::vector<std::string>& trajectory,
                                        int step_idx) {
  return slot("INST", instruction) + "\n\n" + slot("OBS", observation) + "\n\n" +
         slot("TRAJ", render_trajectory(trajectory)) + "\n\n" +
         slot("STEP_IDX", std::to_string(step_idx));
}

/// Single-action judge prompt: main part, one dimension block, filled slots.
inline std::string render_judge_prompt(const std::string& dimension_block,
                                       const std::string& instruction,
                                       const std::string& observation,
                                       const std::vector<std::string>& trajectory,
                                       const std::string& action_text) {
  int step_idx = static_cast<int>(trajectory.size()) + 1;
  return std::string(kEvalMainPart) + "\n\n" + dimension_block + "\n\n" +
         render_context_slots(instruction, observation, trajectory, step_idx) + "\n\n" +
         slot("ACTION", action_text);
}

/// Pairwise evaluation prompt used by the baseline-judge scorer.
inline std::string render_pairwise_prompt(const std::string& dimension_block,
                                          const std::string& instruction,
                                          const std::string& observation,
                                          const std::vector<std::string>& trajectory,
                                          int step_idx,
                                          const std::string& action_x,
                                          const std::string& action_y) {
  return std::string(kEvalMainPart) + "\n\n" + dimension_block + "\n\n" +
         render_context_slots(instruction, observation, trajectory, step_idx) + "\n\n" +
         slot("ACTION_X", action_x) + "\n\n" + slot("ACTION_Y", action_y);
}

/// Reward-model input x: agent preamble plus the current step context.
inline std::string render_model_prompt(const std::string& instruction,
                                       const std::string& observation,
                                       const std::vector<std::string>& trajectory) {
  return std::string(kModelMainPart) + "\n\n" + slot("INST", instruction) + "\n\n" +
         slot("OBS", observation) + "\n\n" +
         slot("REASON_STEPS", render_trajectory(trajectory));
}

}  // namespace prm::prompts
