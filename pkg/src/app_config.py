APP_NAME = "inlg"

# Зарезервированные id словаря
PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3
PAD_TOKEN = "<pad>"
BOS_TOKEN = "<bos>"
EOS_TOKEN = "<eos>"
UNK_TOKEN = "<unk>"
RESERVED_TOKENS = (PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN)
VOCAB_MODES = ("word", "char")

# Бинарные форматы
FEATURES_MAGIC = b"INLGFEAT"
FEATURES_VERSION = 1
CHECKPOINT_MAGIC = b"INLGCKPT"
CHECKPOINT_VERSION = 1
CHECKPOINT_SUFFIX = ".inlgckpt"

# Раскладка директории запуска
CONFIG_SNAPSHOT_NAME = "config.snapshot"
TRAIN_LOG_NAME = "train.log.jsonl"
VOCAB_FILE_NAME = "vocab.txt"
CKPT_SUBDIR = "ckpt"
BEST_CKPT_NAME = "best" + CHECKPOINT_SUFFIX
MAPPING_CKPT_NAME = "mapping" + CHECKPOINT_SUFFIX

# Модель (настольный масштаб)
DEFAULT_D_MODEL = 64
DEFAULT_N_LAYERS = 2
DEFAULT_N_HEADS = 4
DEFAULT_D_FF = 256
DEFAULT_MAX_POSITIONS = 256
DEFAULT_PREFIX_LEN = 20
DEFAULT_D_V = 16  # 512 для признаков CLIP ViT/B-32
DEFAULT_MAPPING_VARIANT = "transformer"
MAPPING_VARIANTS = ("mlp", "transformer")
DEFAULT_MAPPING_LAYERS = {"transformer": 8, "mlp": 2}
DEFAULT_MLP_HIDDEN = 128
DEFAULT_DROPOUT = 0.0
DEFAULT_POOLING = "mean"
POOLING_MODES = ("mean", "last")
INIT_STD = 0.02
LAYER_NORM_EPS = 1e-5
ATTENTION_MASK_VALUE = -1e9

# Оптимизатор
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
DEFAULT_GRAD_CLIP = 1.0

# Обучение (настольный масштаб)
DEFAULT_EPOCHS = 20
DEFAULT_BATCH_SIZE = 8
DEFAULT_LR = 1e-3
DEFAULT_WEIGHT_DECAY = 0.01
DEFAULT_WARMUP_STEPS = 400

# Предобучение отображающей сети
PRETRAIN_EPOCHS = 5
PRETRAIN_BATCH_SIZE = 128
PRETRAIN_WARMUP_STEPS = 5000

# Контрастивная цель
DEFAULT_TAU = 0.1
DENOMINATOR_MODES = ("standard", "paper")
LOSS_REDUCTIONS = ("mean", "sum")

# Декодирование
DEFAULT_BEAM_WIDTH = 10
DEFAULT_LENGTH_ALPHA = 0.0

# Пресеты задач из таблицы гиперпараметров few-shot
TASK_PRESETS = {
    "concept": {"n_no_contra": 4, "lambda": 1.5, "max_len": 64},
    "completion": {"n_no_contra": 10, "lambda": 1.0, "max_len": 100},
    "story": {"n_no_contra": 15, "lambda": 0.2, "max_len": 150},
}
DEFAULT_TASK_PRESET = "completion"

# Гиперпараметры полного масштаба (--paper-hparams)
PAPER_HPARAMS = {
    "lr": 2e-5,
    "batch_size": 8,
    "epochs": 20,
    "warmup_steps": 400,
    "weight_decay": 0.01,
    "beam": 10,
    "prefix_len": 20,
    "mapping": "transformer",
    "mapping_layers": 8,
}

# Синтетический мир
SYNTHETIC_ATTRIBUTE_WORDS = (
    "red", "blue", "green", "cat", "dog", "bird", "small", "big",
    "wooden", "shiny", "striped", "round", "tall", "old", "young", "wet",
)
SYNTHETIC_CONTEXT = "describe the picture :"
SYNTHETIC_TARGET_TEMPLATE = "there is a {attributes} thing here ."
SYNTHETIC_NUM_ATTRIBUTES = 8
SYNTHETIC_MAX_PER_EXAMPLE = 3
SYNTHETIC_NOISE_STD = 0.05
SYNTHETIC_SPLITS = {"train": 512, "val": 128}
SYNTHETIC_FEATURES_NAME = "features.inlgfeat"

# Градиентная проверка
GRADCHECK_EPS = 1e-3
GRADCHECK_THRESHOLD = 1e-3
# None - проверяются все элементы каждого тензора
GRADCHECK_MAX_ENTRIES = None
TINY_MODEL = {
    "d_model": 16,
    "n_layers": 2,
    "n_heads": 2,
    "d_ff": 32,
    "vocab_size": 20,
    "max_positions": 32,
    "prefix_len": 4,
    "d_v": 8,
    "mapping_variant": "mlp",
    "mapping_layers": 2,
    "mlp_hidden": 16,
    "dropout": 0.0,
    "init_std": 0.1,
}
TINY_BATCH_SIZE = 4
# Для проверки градиента хватает 4+3+5 позиций, узкие FFN и признак ускоряют полный проход
GRADCHECK_MODEL_OVERRIDES = {
    "max_positions": 12,
    "d_ff": 16,
    "mlp_hidden": 8,
    "d_v": 4,
}

# Коды завершения CLI
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

# Абляции
ABLATION_GRIDS = ("mapping", "tuning", "contrastive")
ABLATION_PREFIX_LENS = (1, 5, 10, 15, 20)
ABLATION_RESULT_NAME = "ablation.json"
ALIGNMENT_PROBE_SIZE = 32
