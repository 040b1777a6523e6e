"""Provider-neutral LLM gateway: chat, templates, structured output, mock."""

from secplan.llm.mock import MockProvider, ScriptRule, mock_provider
from secplan.llm.provider import (
    ChatExchange,
    ChatProvider,
    HttpChatProvider,
    HttpEmbeddingProvider,
    ProviderConfig,
    chat,
)
from secplan.llm.structured import SCHEMAS, chat_structured, extract_json_object, parse_structured
from secplan.llm.templates import (
    ELEMENT_EXTRACTION,
    POLICY_CLASSIFICATION,
    QUERY_REDUNDANCY,
    TEMPLATE_VERSION,
    TEMPLATES,
    TEST_CASE_GENERATION,
    THREAT_ASSESSMENT,
    PromptTemplate,
    render_prompt,
)

__all__ = [
    "ChatExchange",
    "ChatProvider",
    "HttpChatProvider",
    "HttpEmbeddingProvider",
    "MockProvider",
    "ProviderConfig",
    "PromptTemplate",
    "SCHEMAS",
    "ScriptRule",
    "TEMPLATES",
    "TEMPLATE_VERSION",
    "THREAT_ASSESSMENT",
    "QUERY_REDUNDANCY",
    "ELEMENT_EXTRACTION",
    "POLICY_CLASSIFICATION",
    "TEST_CASE_GENERATION",
    "chat",
    "chat_structured",
    "extract_json_object",
    "mock_provider",
    "parse_structured",
    "render_prompt",
]
