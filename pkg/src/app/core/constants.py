"""
Constants used throughout the scg-emotion pipeline.

Every numeric default of the signal chains, the feature extractors and the
classification protocol lives here so that the configuration layer can expose
and hash them in one place.
"""

# Rating scale
RATING_MIN = 1.0
RATING_MAX = 9.0
RATING_MID_THRESHOLD = 5.0
TIE_IS_HIGH = False  # rating == 5.0 -> Low
MIN_CLASS_FRACTION = 0.10

# Filtering
FILTER_ORDER = 4
PAD_FACTOR = 3  # even-pad length = PAD_FACTOR * filter taps

# Welch spectral estimation
WELCH_SEGMENT = 256
WELCH_OVERLAP = 0.5
SLOW_SEGMENT_SECONDS = 64.0

# Seismocardiography and accelerometry-derived respiration
SCG_RATE = 200.0
SCG_BAND = (10.0, 20.0)
AO_ENVELOPE_BAND = (0.5, 2.0)
AO_MIN_DISTANCE = 0.375  # s, 160 bpm ceiling
AO_RELATIVE_HEIGHT = 0.25  # fraction of the 98th percentile of the envelope
AO_HEIGHT_PERCENTILE = 98.0
ADR_BAND = (0.15, 0.35)
ADR_BASELINE_SECONDS = 20.0
ADR_MIN_DURATION = 20.0

# Electrocardiography (two moving averages detector)
ECG_BAND = (8.0, 20.0)
ECG_QRS_WINDOW = 0.097
ECG_BEAT_WINDOW = 0.611
ECG_OFFSET_BETA = 0.08
ECG_MIN_BLOCK = 0.08
ECG_REFRACTORY = 0.3

# Blood volume pulse
DETREND_WINDOW = 256  # samples, BVP and EDA
BVP_MIN_DISTANCE = 0.375
BVP_PROMINENCE_PERCENTILE = 60.0
BVP_PROMINENCE_FACTOR = 0.5
BVP_ROLLING_SECONDS = 10.0
BVP_NEGLIGIBLE_FRACTION = 0.1  # of the detrended signal's 2-98 percentile range

# Respiration
RSP_BAND = (0.15, 0.35)
BREATH_MIN_DISTANCE = (1.0 / 0.35) * 0.8
BREATH_MIN_LOBE_FRACTION = 0.1
BB_WINDOW = (BREATH_MIN_DISTANCE, 20.0)

# Detector preconditions
MIN_DETECTOR_DURATION = 5.0
MIN_EDA_DURATION = 20.0
MIN_ENVELOPE_LENGTH = 8

# Inter-beat intervals
IBI_SCREENING = True
IBI_WINDOW = (0.3, 2.0)
TACHOGRAM_RATE = 4.0
HISTOGRAM_BIN = 1.0 / 128.0
PNN_THRESHOLDS = (0.020, 0.050)

# Frequency bands (Hz)
LF_BAND = (0.04, 0.15)
HF_BAND = (0.15, 0.5)
IBI_BANDS = ((0.1, 0.2), (0.2, 0.3), (0.3, 0.4))
IBI_DERIVATIVE_BANDS = ((0.01, 0.08), (0.08, 0.15), (0.15, 0.5))
TOTAL_POWER_LIMIT = 0.5
RRV_LF_BAND = (0.04, 0.15)
RRV_HF_BAND = (0.15, 0.4)
RESP_LOW_BAND = (0.05, 0.25)
RESP_HIGH_BAND = (0.25, 5.0)
BROADBAND_LIMIT = 2.4
LOG_EPSILON = 1e-12
SKT_BANDS = ((0.0, 0.1), (0.1, 0.2))
APEN_ORDER = 2
APEN_TOLERANCE = 0.2

# Electrodermal activity
SCSR_CUTOFF = 0.2
SCVSR_CUTOFF = 0.08

# EMG / EOG
EMG_BAND = (4.0, 40.0)
BLINK_MAD_FACTOR = 3.0
BLINK_ROLLING_SECONDS = 5.0
BLINK_REFRACTORY = 0.25
BLINK_MIN_PROMINENCE = 18.0  # multiples of the median rolling MAD

# Feature selection
FISHER_THRESHOLD = 0.3
MIN_FEATURE_COUNT = 15
FISHER_DDOF = 0

# Classifiers
DEFAULT_C = 1.0
C_GRID = (0.01, 0.1, 1.0, 10.0)
LR_TOLERANCE = 1e-6
SVM_TOLERANCE = 1e-4
MAX_ITERATIONS = 1000
NB_VAR_SMOOTHING = 1e-9

# Evaluation
STAR_LEVELS = ((0.001, "***"), (0.01, "**"), (0.05, "*"))
BASELINE_REPETITIONS = 1000
T_TEST_ALTERNATIVE = "greater"
SELECTION_SCOPE = "fold"
SUMMARY_CLASSIFIERS = ("SVM", "LR")
DEFAULT_SEED = 42

# Synthetic generator
SYNTH_ECG_RATE = 256.0
SYNTH_ACC_RATE = 400.0
SYNTH_BVP_RATE = 64.0
SYNTH_RSP_RATE = 25.0
SYNTH_EDA_RATE = 32.0
SYNTH_SKT_RATE = 4.0
SYNTH_DEAP_RATE = 128.0

# Reports
DECIMALS = 3
