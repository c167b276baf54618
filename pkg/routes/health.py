from flask import Blueprint, current_app, jsonify
from models import db
import logging
from datetime import datetime

logger = logging.getLogger(__name__)

health_bp = Blueprint('health', __name__)

@health_bp.route('/health/live', methods=['GET'])
def liveness_check():
    """Liveness check - no database access"""
    return jsonify({
        'status': 'alive',
        'service': current_app.config.get('SERVICE_NAME', 'fingerprint-verification')
    }), 200

@health_bp.route('/health', methods=['GET'])
def health_check():
    """Database ping plus a check that the pipeline configuration is loaded"""
    health_status = {
        'service': current_app.config.get('SERVICE_NAME', 'fingerprint-verification'),
        'status': 'healthy',
        'version': '1.0.0',
        'timestamp': datetime.utcnow().isoformat()
    }

    try:
        from sqlalchemy import text
        db.session.execute(text('SELECT 1'))
        db.session.commit()
        health_status['database'] = 'connected'
    except Exception as e:
        logger.error(f"Health check database error: {e}")
        health_status['database'] = f'error: {str(e)}'
        health_status['status'] = 'unhealthy'

    service = current_app.extensions.get('matching_service')
    health_status['pipeline'] = 'configured' if service is not None else 'missing'
    health_status['normalizers'] = sorted(current_app.extensions.get('normalizers', {}))
    if service is None:
        health_status['status'] = 'unhealthy'

    status_code = 200 if health_status['status'] == 'healthy' else 503
    return jsonify(health_status), status_code
