"""Optional transformer backend: real encoders behind the same interface.

Loads locally available weights only (no downloads at serve time): a
1024-dim sentence encoder for questions, a 2048-dim CNN pool for images,
a sequence-pair classifier head for relevance, and a QA head for spans.
Anything missing raises a clear startup error; responses are validated by
the server for schema and range like any backend.
"""

from __future__ import annotations

from pathlib import Path

from . import IMAGE_DIM, QUESTION_DIM


class TransformersModel:
    mode = "transformers"
    question_dim = QUESTION_DIM
    image_dim = IMAGE_DIM

    def __init__(self, question_model: str, image_model: str | None = None,
                 pair_model: str | None = None, span_model: str | None = None):
        try:
            import torch  # noqa: F401
            from transformers import AutoModel, AutoTokenizer
        except ImportError as e:
            raise RuntimeError(
                "transformers mode needs torch and transformers installed "
                "(pip install 'scorer-sidecar[transformers]')"
            ) from e
        if not Path(question_model).exists():
            raise RuntimeError(
                f"question model path {question_model!r} not found; transformers "
                "mode serves local weights only"
            )
        self.model_id = question_model
        self._tokenizer = AutoTokenizer.from_pretrained(question_model)
        self._encoder = AutoModel.from_pretrained(question_model)
        self._encoder.eval()
        hidden = self._encoder.config.hidden_size
        if hidden != self.question_dim:
            raise RuntimeError(
                f"question encoder is {hidden}-dim; a {self.question_dim}-dim "
                "(large) encoder is required"
            )
        self._image_model_path = image_model
        self._image_model = None
        self._pair = self._load_pair(pair_model)
        self._span = self._load_span(span_model)

    def _load_pair(self, path: str | None):
        if path is None:
            return None
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        return (
            AutoTokenizer.from_pretrained(path),
            AutoModelForSequenceClassification.from_pretrained(path).eval(),
        )

    def _load_span(self, path: str | None):
        if path is None:
            return None
        from transformers import AutoModelForQuestionAnswering, AutoTokenizer

        return (
            AutoTokenizer.from_pretrained(path),
            AutoModelForQuestionAnswering.from_pretrained(path).eval(),
        )

    def embed_question(self, question: str) -> list[float]:
        import torch

        inputs = self._tokenizer(question, return_tensors="pt", truncation=True)
        with torch.no_grad():
            out = self._encoder(**inputs)
        # hidden state at the sequence-start classification token
        return [float(x) for x in out.last_hidden_state[0, 0]]

    def _ensure_image_model(self):
        if self._image_model is None:
            import torch
            from torchvision import models

            if not self._image_model_path:
                raise RuntimeError("no image model configured")
            model = models.resnet152()
            state = torch.load(self._image_model_path, map_location="cpu")
            model.load_state_dict(state)
            model.fc = torch.nn.Identity()  # 2048-dim pooled features
            self._image_model = model.eval()
        return self._image_model

    def embed_image(self, image_ref: str) -> list[float]:
        import torch
        from PIL import Image
        from torchvision import transforms

        model = self._ensure_image_model()
        prep = transforms.Compose(
            [
                transforms.Resize(256),
                transforms.CenterCrop(224),
                transforms.ToTensor(),
                transforms.Normalize([0.485, 0.456, 0.406], [0.229, 0.224, 0.225]),
            ]
        )
        with Image.open(image_ref) as im:
            batch = prep(im.convert("RGB")).unsqueeze(0)
        with torch.no_grad():
            feats = model(batch)[0]
        return [float(x) for x in feats]

    def score_pair(self, question: str, context: str) -> float:
        if self._pair is None:
            raise RuntimeError("no pair model configured")
        import torch

        tokenizer, model = self._pair
        inputs = tokenizer(question, context, return_tensors="pt", truncation=True)
        with torch.no_grad():
            logits = model(**inputs).logits[0]
        if logits.numel() == 1:
            return float(torch.sigmoid(logits))
        return float(torch.softmax(logits, dim=-1)[-1])

    def extract_span(self, question: str, context: str) -> dict:
        if self._span is None:
            raise RuntimeError("no span model configured")
        import torch

        tokenizer, model = self._span
        inputs = tokenizer(question, context, return_tensors="pt", truncation=True)
        with torch.no_grad():
            out = model(**inputs)
        start_tok = int(out.start_logits.argmax())
        end_tok = int(max(out.end_logits.argmax(), start_tok))
        answer = tokenizer.decode(
            inputs["input_ids"][0][start_tok : end_tok + 1], skip_special_tokens=True
        ).strip()
        # report word positions in the whitespace-split context
        words = context.split()
        first = answer.split()[0] if answer.split() else ""
        start_word = next((i for i, w in enumerate(words) if first and first in w), 0)
        end_word = min(start_word + max(len(answer.split()) - 1, 0), max(len(words) - 1, 0))
        return {"start": start_word, "end": end_word, "text": answer}

    def health(self) -> dict:
        return {
            "model": self.model_id,
            "mode": self.mode,
            "question_dim": self.question_dim,
            "image_dim": self.image_dim,
        }
