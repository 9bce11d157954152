#pragma once

#include "rega/corpus.hpp"

#include <string>

namespace rega {

// Built-in role prompts for the medicine / law / finance domains and a
// generalist central prompt. All of them are plain defaults; pipelines can
// override every text through the prompts config file.
RolePromptSet default_role_prompts();

const std::string& default_central_prompt();

// Chinese judge prompt asking for a 0-10 quality score in a fixed JSON shape.
// Placeholders: {question} and {answer}.
const std::string& default_judge_template();

// Path into the judge's JSON reply where the numeric score lives.
const std::string& default_judge_score_path();

} // namespace rega
