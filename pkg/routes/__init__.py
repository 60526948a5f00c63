# Blueprints are registered in app.create_app.
