#pragma once

// Prompt templates and their renderers. Template text is reproduced byte for
// byte, trailing spaces included.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vrduqa::prompts {

/// Rewrites a corrupted question; placeholders {original_question},
/// {corrupted_question}, {list(all_corrupted_entities)}.
inline constexpr std::string_view kRefinementTemplate =
    "You are given two questions. The first one is the original one, the second one is the corrupted one.\n"
    "The corruption is done based on entities extracted from the original question.\n"
    "\n"
    "Original question: \"{original_question}\"\n"
    "Corrupted question: \"{corrupted_question}\"\n"
    "\n"
    "You have to help me rewrite the corrupted question to make it meaningful while:\n"
    "1. Making it coherent and natural, while strictly keeping the exact same meaning\n"
    "2. Ensuring it makes sense in the context of the original question\n"
    "3. The following corrupted entities must be preserved in the rewritten question: {list(all_corrupted_entities)}\n"
    "4. Editing the question minimally - only what's needed to make it coherent\n"
    "5. Guaranteeing that the final output is meaningful\n"
    "\n"
    "Original: \"What is the highest temperature recorded?\"\n"
    "Bad corruption: \"What is the 85 F temperature recorded?\"\n"
    "Correct rewrite: \"Was 85 F the highest temperature recorded?\"\n"
    "\n"
    "Good Examples:\n"
    "Original: \"Which year is mentioned first in the x axis?\"\n"
    "Bad corruption: \"Which 1975 is mentioned first in the x axis?\"\n"
    "Good rewrite: \"Is 1975 the first year mentioned in the x axis?\"\n"
    "\n"
    "Original: \"Which company had the most sales in 2022?\"\n"
    "Bad corruption: \"Which Microsoft had the most sales in 2022?\"\n"
    "Correct rewrite: \"Did Microsoft have the most sales in 2022?\"\n"
    "\n"
    "Important: Return only the rewritten question without any explanation or introductions.";

/// Per-page answerability check; placeholders {ocr_text}, {entities_string},
/// {question}.
inline constexpr std::string_view kJudgeTemplate =
    "You are an expert in Visual Question Answering on Document images. \n"
    "We are working on a project to verify the answerability of questions based on the information provided in a given image. \n"
    "In detail we have taken questions from a multipage VQA dataset and we have corrupted the questions based on the entities found in the whole document associated to the question. \n"
    "Now, given the corrupted question and each image of the document, we want to verify if the question is answerable based solely on the information provided in the given image. \n"
    "Your task is to help us to determine if the following corrupted question is answerable based solely on the information provided in the given image. \n"
    "The question answer must be explicitly stated in the image. \n"
    "In order to have a better document understanding, we extracted the following OCR text from the document:\n"
    "{ocr_text}\n"
    "\n"
    "In addition here we provide the original entities found in the question and the corrupted ones in order to allow you to place special focus on the corrupted ones. The entities are reported with the format: ORIGINAL --> CORRUPTED:\n"
    "{entities_string}\n"
    "\n"
    "Respond with a structured response in JSON format with the following fields:\n"
    "{\n"
    "    \"verification_result\": \"true if the question is answerable based solely on the information provided in the given image, or 'false' if it's not answerable\",\n"
    "    \"question_answer\": \"The answer to the question or only the words 'not found' if the answer is not explicitly stated in the image\"\n"
    "}\n"
    "Return only the JSON response. Without any other text or explanation.\n"
    "Question: {question}";

/// VQA prompt. Lines tagged '#OPTIONAL' / '# OPTIONAL' are variant-dependent:
/// the OCR line follows include_ocr, the two 'Unable to determine' lines follow
/// explicit_unanswerable.
inline constexpr std::string_view kVqaTemplate =
    "You are an AI assistant specialized in analyzing document images and text.\n"
    "Your task is to answer questions about the document image content precisely.\n"
    "\n"
    "For this question, you have the following OCR text: {ocr_text} #OPTIONAL\n"
    "\n"
    "Guidelines:\n"
    "- Provide concise, focused answers (single word or short phrase preferred)\n"
    "- Base your answer on both the image and the provided OCR text\n"
    "- If uncertain, return 'Unable to determine' # OPTIONAL\n"
    "- If you can't find the answer, return 'Unable to determine' # OPTIONAL\n"
    "Question: {question}";

/// Answer standardization; placeholder {answer}.
inline constexpr std::string_view kStandardizationTemplate =
    "I'm performing an evaluation test on the ability of different models to answer VQA questions from document images.\n"
    "The model could return different answers to determine if the answer is 'unable to determine' or not. \n"
    "Your task is to detect if the answer means that the model is unable to determine the answer or not. \n"
    "Examples of answers that mean that the model is unable to determine the answer: \n"
    "- Not available. \n"
    "- Not provided in document. \n"
    "- The image does not provide information to answer the question. \n"
    "- I cannot provide an answer based on the given text. \n"
    "- The document does not provide information \n"
    "If the answer means 'unable to determine', respond with 'unable to determine', otherwise return the original answer. \n"
    "The answer is: {answer} \n"
    "Please respond only with the original answer or 'unable to determine' only.";

/// Python-style repr of a list of strings, e.g. ['85 F', "O'Hare"].
std::string python_list_repr(const std::vector<std::string>& items);

/// Replaces each {name} token of `tmpl` found in `values` in a single pass;
/// substituted text is never rescanned. Unknown braces are left alone.
std::string fill(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values);

std::string refinement_prompt(const std::string& original_question, const std::string& corrupted_question,
                              const std::vector<std::string>& corrupted_entities);

/// `mappings` are (original, substitute) pairs rendered one per line as
/// "ORIGINAL --> CORRUPTED".
std::string judge_prompt(const std::string& ocr_text,
                         const std::vector<std::pair<std::string, std::string>>& mappings,
                         const std::string& question);

/// `ocr_text` present selects the OCR line; `explicit_unanswerable` keeps the
/// two 'Unable to determine' guidelines. The marker comments are removed.
std::string vqa_prompt(const std::string& question, const std::optional<std::string>& ocr_text,
                       bool explicit_unanswerable);

std::string standardization_prompt(const std::string& answer);

}  // namespace vrduqa::prompts
