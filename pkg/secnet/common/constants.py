TEN_MAGIC = b"SECT"
TEN_VERSION = 1
TEN_DTYPE_F64 = 0
TEN_DTYPE_F32 = 1

CHECKPOINT_MANIFEST = "manifest.json"
CHECKPOINT_VERSION = 1

FRAME_FILE_REGEX = r"^frame_(\d{4,})\.(ppm|ten)$"
SEQUENCE_GROUP_SEPARATOR = "__"

PSNR_CAP_DB = 100.0

TRAIN_LOG_HEADER = ["step", "phase", "loss", "loss_e", "loss_l", "loss_f", "lr"]
