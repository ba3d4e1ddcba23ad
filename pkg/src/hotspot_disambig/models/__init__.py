from .common import AdamW, Standardizer, sigmoid
from .gbdt import GBDTConfig, GBDTModel, train_gbdt
from .io import ModelFormatError, dumps_model, load_model, model_from_dict, model_to_dict, predict_proba, save_model
from .logreg import LRConfig, LRModel, train_logreg
from .mlp import MLPConfig, MLPModel, train_mlp
