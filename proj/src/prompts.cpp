#include "pns/prompts.hpp"

#include <stdexcept>

#include "pns/types.hpp"

namespace pns {
namespace {

constexpr std::string_view kSystemPrompt =
    R"PROMPT(You are a helpful AI Assistant that provides well-reasoned and detailed responses. You should FIRST output your internal thought process and then provide the final answer. The reasoning process MUST BE enclosed within <think> </think> tags. The final answer MUST BE put in \boxed{}.)PROMPT";

constexpr std::string_view kFormatJudgePrompt =
    R"PROMPT(You are a strict, stable, and conservative judge for math solution quality.

Your job: Decide whether the given "model response" contains an ADEQUATE step-by-step mathematical solving process.

Definition of ADEQUATE step-by-step solving process (PASS):
- Contains explicit, checkable mathematical derivations or computations, such as: equation setup and transformations; substitutions, expansions, simplifications; intermediate numeric calculations; long multiplication / division / remainder steps; clearly shown intermediate results that lead to the final answer.
- The reasoning must be more than a high-level plan; it must show actual math work.

FAIL if any of these dominate:
- Only "planning" language (e.g., "we will use theorem X") without actually applying it with concrete steps.
- Jumps to the final answer with little/no intermediate math.
- Empty / meaningless / irrelevant <think> or text.
- Mostly vague explanation with no checkable math.

Output rules (VERY IMPORTANT):
1. First write a brief analysis (1-5 sentences max).
2. Then output ONLY one JSON object inside <final> ... </final>.
3. The JSON must have EXACTLY ONE key: "verdict"
4. "verdict" must be exactly one of: "pass" or "fail"
5. Do not output any other keys, text, or formatting outside <final>.

[model response]
{response}

Output strictly like:
<final>
{"verdict":"pass"}
</final>)PROMPT";

constexpr std::string_view kCotJudgePrompt =
    R"PROMPT(You are a strict, stable, and conservative judge for math problems. Given the "task problem", score the "model response" on the FOUR dimensions below.
Each dimension must be an integer from 0 to 3:
- 3: Excellent / no or almost no issues
- 2: Minor issues but acceptable overall
- 1: Major issues / clearly problematic
- 0: Essentially unusable

Four dimensions (MUST output a numeric score for each):
1. Reasoning validity: Does <think> contain steps that are directly relevant to the problem? Heavily penalize: empty <think>, irrelevant/nonsensical text, "theorem/technique name-dropping" without actually using it.
2. Reasoning-conclusion consistency: Does the reasoning support the conclusion? The reasoning should include checkable mathematical derivations, not merely a high-level plan. Heavily penalize: conclusion not supported by shown steps; reasoning contains only planning/intent without explicit derivation.
3. Instruction following: Does the response follow all constraints? Does it include off-task or disallowed extras?
4. Repetition issues and unnecessary language mixing: Mechanical repetition, templated filler, excessive restating. Unnecessary mixing of languages or styles that harms readability.

[task problem]
{prompt}

[model response]
{response}

Output strictly in the following format (ONLY one JSON inside <final>):
<final>
{
  "Reasoning validity": 0-3,
  "Reasoning-conclusion consistency": 0-3,
  "Instruction following": 0-3,
  "Repetition issues and unnecessary language mixing": 0-3
}
</final>)PROMPT";

constexpr std::string_view kErrorClassificationPrompt =
    R"PROMPT(You are an expert AI assistant tasked with identifying the single, most specific error category from the list below.

Error Category List:
- Understanding Errors: Problem Misunderstanding, Conceptual Misunderstanding
- Knowledge Errors: Factual Error, Theorem Error, Definition Error
- Logical Errors: Strategy Error, Reasoning Error, Premise Error, Consistency Error
- Calculation Errors: Numerical Error, Formula Error, Parameter Error, Unit Error
- Programming Errors: Syntax Error, Function Error, Data Type Error
- Formal Errors: Symbol Error, Formatting Error
- Completeness Errors: Boundary Omission
- Special Cases: Reflection Error, Summary Error, Hallucination, Redundancy
- Evaluation System Errors: Incorrect Ground Truth, Correct Answer Parsing Error

Data for Analysis:
- Question: {question}
- Ground Truth Answer: {groundtruth}
- Model's Reasoning Process (to be analyzed): {model_reasoning}

CRITICAL INSTRUCTION:
Analyze the provided reasoning process. Your response MUST be ONLY a single, raw JSON object with the keys "sub_category" and "analysis". Do not include any other text, explanations, apologies, or markdown formatting.

Example of a perfect response:
{"sub_category": "Premise Error", "analysis": "The model incorrectly assumed that all bicycles use plastic squares for identification, which is a flawed premise not supported by the question's context."})PROMPT";

}  // namespace

PromptTemplate::PromptTemplate(std::string_view text,
                               std::initializer_list<std::string_view> slots)
    : source_(text) {
  for (auto s : slots) slot_names_.emplace_back(s);
  std::string literal;
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    if (text[i] == '{') {
      for (const auto& name : slot_names_) {
        const std::size_t len = name.size() + 2;
        if (text.substr(i, len) == "{" + name + "}") {
          segments_.push_back({std::move(literal), ""});
          segments_.push_back({"", name});
          literal.clear();
          i += len;
          matched = true;
          break;
        }
      }
    }
    if (!matched) literal.push_back(text[i++]);
  }
  segments_.push_back({std::move(literal), ""});
}

RenderedPrompt PromptTemplate::render(
    std::initializer_list<std::pair<std::string_view, std::string_view>> values) const {
  RenderedPrompt out;
  for (const auto& seg : segments_) {
    if (seg.slot.empty()) {
      out.text += seg.literal;
      continue;
    }
    const std::pair<std::string_view, std::string_view>* hit = nullptr;
    for (const auto& kv : values) {
      if (kv.first == seg.slot) hit = &kv;
    }
    if (!hit) throw InvalidInput("missing value for prompt slot '" + seg.slot + "'");
    out.spans.push_back({seg.slot, out.text.size(), hit->second.size()});
    out.text += hit->second;
  }
  return out;
}

const PromptTemplate& system_prompt_template() {
  static const PromptTemplate t(kSystemPrompt, {});
  return t;
}

const PromptTemplate& format_judge_template() {
  static const PromptTemplate t(kFormatJudgePrompt, {"response"});
  return t;
}

const PromptTemplate& cot_judge_template() {
  static const PromptTemplate t(kCotJudgePrompt, {"prompt", "response"});
  return t;
}

const PromptTemplate& error_classification_template() {
  static const PromptTemplate t(kErrorClassificationPrompt,
                                {"question", "groundtruth", "model_reasoning"});
  return t;
}

std::string render_system_prompt() { return system_prompt_template().render({}).text; }

std::string render_judge_prompt(std::string_view response) {
  return format_judge_template().render({{"response", response}}).text;
}

std::string render_cot_prompt(std::string_view prompt, std::string_view response) {
  return cot_judge_template().render({{"prompt", prompt}, {"response", response}}).text;
}

std::string render_error_prompt(std::string_view question, std::string_view groundtruth,
                                std::string_view reasoning) {
  return error_classification_template()
      .render({{"question", question}, {"groundtruth", groundtruth}, {"model_reasoning", reasoning}})
      .text;
}

}  // namespace pns
