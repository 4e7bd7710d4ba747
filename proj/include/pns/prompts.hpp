#pragma once

// Judge and system prompt templates. Each template is a fixed text with named
// slots ({response}, {prompt}, {question}, {groundtruth}, {model_reasoning}).
// Slot values are substituted literally; no escaping is applied and slot
// values are never rescanned for placeholders.

#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pns {

struct SlotSpan {
  std::string slot;
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct RenderedPrompt {
  std::string text;
  std::vector<SlotSpan> spans;  // ascending by offset
};

class PromptTemplate {
 public:
  // `text` contains placeholders of the form {name} for each name in `slots`.
  // Braces that do not form a declared placeholder are literal text.
  PromptTemplate(std::string_view text, std::initializer_list<std::string_view> slots);

  RenderedPrompt render(
      std::initializer_list<std::pair<std::string_view, std::string_view>> values) const;

  const std::string& source() const { return source_; }
  const std::vector<std::string>& slot_names() const { return slot_names_; }

 private:
  struct Segment {
    std::string literal;
    std::string slot;  // empty for literal segments
  };
  std::string source_;
  std::vector<std::string> slot_names_;
  std::vector<Segment> segments_;
};

const PromptTemplate& system_prompt_template();
const PromptTemplate& format_judge_template();
const PromptTemplate& cot_judge_template();
const PromptTemplate& error_classification_template();

std::string render_system_prompt();
std::string render_judge_prompt(std::string_view response);
std::string render_cot_prompt(std::string_view prompt, std::string_view response);
std::string render_error_prompt(std::string_view question, std::string_view groundtruth,
                                std::string_view reasoning);

}  // namespace pns
