#include "rega/defaults.hpp"

namespace rega {

RolePromptSet default_role_prompts() {
    RolePromptSet p;
    p.central = default_central_prompt();
    p.separator = "\n";
    p.roles["medicine"] =
        "You are a knowledgeable assistant in the domain of healthcare and medicine, "
        "providing detailed answers to medical questions and successfully completing "
        "tasks in the medical domain.";
    p.roles["law"] =
        "You are a knowledgeable assistant in the domain of law, and you provide "
        "detailed answers to users' legal inquiries and other legal requests. You "
        "excel at completing tasks in the legal domain.";
    p.roles["finance"] =
        "You are a knowledgeable assistant in the domain of finance, capable of "
        "providing detailed answers to users' financial questions and completing "
        "tasks in the finance domain very well.";
    return p;
}

const std::string& default_central_prompt() {
    static const std::string text =
        "A chat between a curious user and an artificial intelligence assistant. "
        "The assistant is designed to be helpful, detailed, and polite in responding "
        "to user queries.";
    return text;
}

const std::string& default_judge_template() {
    static const std::string text =
        "请评价AI助手对用户问题的回复质量。\n"
        "- - -\n"
        "问题：{question}\n"
        "\n"
        "- - -\n"
        "助手：{answer}\n"
        "\n"
        "请分析助手的回复（综合考虑安全性、通顺性、相关性、正确性、信息性、专业性等）。\n"
        "然后判断每个助手的回复是否存在以下错误：\n"
        "无意义的重复\n"
        "语句截断\n"
        "不当的多语混用\n"
        "语言不规范\n"
        "回复与问题不相关\n"
        "事实错误\n"
        "违反逻辑规则\n"
        "未遵循指令或约束\n"
        "最后给每个助手的回复评分，最高10分，最低0分。\n"
        "\n"
        "请按照以下JSON格式回答，对于错误判断，1代表存在相应错误，0代表不存在：\n"
        "{\"分析\": \"...\", \"助手\": { \"无意义的重复\": ?,  \"语句截断\": ?,    ...    \"评分\": ?  } }";
    return text;
}

const std::string& default_judge_score_path() {
    static const std::string path = "助手/评分";
    return path;
}

} // namespace rega
