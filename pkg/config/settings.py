import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

class Config:
    """Base configuration class"""

    # Flask settings
    SECRET_KEY = os.getenv('SECRET_KEY', 'dev-secret-key-change-in-production')
    DEBUG = os.getenv('FLASK_DEBUG', 'False').lower() == 'true'

    # Database settings (comparison log)
    DATABASE_URL = os.getenv('DATABASE_URL', 'sqlite:///fingerprint_scores.db')
    SQLALCHEMY_DATABASE_URI = DATABASE_URL
    SQLALCHEMY_TRACK_MODIFICATIONS = False
    SQLALCHEMY_ENGINE_OPTIONS = {
        'pool_pre_ping': True
    }

    # Service configuration
    SERVICE_NAME = os.getenv('SERVICE_NAME', 'fingerprint-verification')
    SERVICE_PORT = int(os.getenv('SERVICE_PORT', 8010))

    # Pipeline configuration file ("key = value" lines); empty means defaults
    PIPELINE_CONFIG = os.getenv('PIPELINE_CONFIG', '')

    # Calibrated normalizers ("NORM matcher kind c" lines) applied by /api/match
    NORMALIZERS_FILE = os.getenv('NORMALIZERS_FILE', '')

    # Worker threads for protocol runs
    EVAL_WORKERS = int(os.getenv('EVAL_WORKERS', 1))

    # Uploads
    MAX_UPLOAD_MB = int(os.getenv('MAX_UPLOAD_MB', 8))
    MAX_CONTENT_LENGTH = MAX_UPLOAD_MB * 1024 * 1024

    # CORS settings
    CORS_ORIGINS = os.getenv('CORS_ORIGINS', '*')

    # Logging
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')

class DevelopmentConfig(Config):
    """Development configuration"""
    DEBUG = True
    SQLALCHEMY_ECHO = False

class ProductionConfig(Config):
    """Production configuration"""
    DEBUG = False
    SQLALCHEMY_ECHO = False

class TestingConfig(Config):
    """Testing configuration"""
    TESTING = True
    SQLALCHEMY_DATABASE_URI = os.getenv('TEST_DATABASE_URL', 'sqlite:///:memory:')
    PIPELINE_CONFIG = ''
    NORMALIZERS_FILE = ''
    EVAL_WORKERS = 1

# Configuration mapping
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}
