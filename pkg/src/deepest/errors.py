"""Exception hierarchy shared across the pipeline.

Every error carries a stable ``code`` string so the CLI and the HTTP
service can emit structured error lines/bodies without string matching.
"""

from __future__ import annotations


class DeepestError(Exception):
    """Base class; ``code`` defaults to the class name."""

    code = "DeepestError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


def _make(name: str, doc: str = "") -> type:
    cls = type(name, (DeepestError,), {"code": name, "__doc__": doc or name})
    return cls


# corpus
MissingDirectory = _make("MissingDirectory")
UnreadableAudio = _make("UnreadableAudio")
SampleRateMismatch = _make("SampleRateMismatch")


class InsufficientUtterances(DeepestError):
    code = "InsufficientUtterances"

    def __init__(self, speaker: str, emotion: str, have: int, need: int):
        super().__init__(
            f"speaker={speaker} emotion={emotion}: have {have} utterances, need {need}"
        )
        self.speaker = speaker
        self.emotion = emotion
        self.have = have
        self.need = need


# dsp
EmptyWaveform = _make("EmptyWaveform")
UnsupportedSampleRate = _make("UnsupportedSampleRate")
InvalidFeatures = _make("InvalidFeatures")
NonPositiveSpectrum = _make("NonPositiveSpectrum")
EmptyTrack = _make("EmptyTrack")
OrderMismatch = _make("OrderMismatch")
NoVoicedFrames = _make("NoVoicedFrames")

# ser
InsufficientClasses = _make("InsufficientClasses")
EmptyCorpus = _make("EmptyCorpus")
UntrainedModel = _make("UntrainedModel")
EmptyReferenceSet = _make("EmptyReferenceSet")

# vawgan
ShapeMismatch = _make("ShapeMismatch")
NonFiniteOutput = _make("NonFiniteOutput")


class NonFiniteLoss(DeepestError):
    code = "NonFiniteLoss"

    def __init__(self, term: str):
        super().__init__(f"non-finite loss term: {term}")
        self.term = term


EmptyTrainSet = _make("EmptyTrainSet")
DivergedTraining = _make("DivergedTraining")

# convert
DegenerateSourceStats = _make("DegenerateSourceStats")

# evaluate
class MissingPair(DeepestError):
    code = "MissingPair"

    def __init__(self, text_id: str, detail: str = ""):
        super().__init__(f"no reference pair for text_id={text_id} {detail}".strip())
        self.text_id = text_id


TooFewPoints = _make("TooFewPoints")
LabelMismatch = _make("LabelMismatch")

# listening service
MissingStimulus = _make("MissingStimulus")
DuplicateResponse = _make("DuplicateResponse")
UnknownTrial = _make("UnknownTrial")
UnknownSession = _make("UnknownSession")
InvalidValue = _make("InvalidValue")
InsufficientResponses = _make("InsufficientResponses")
